//! Matrix Market I/O for square `real general` matrices.
//!
//! Both the dense `array` layout (column-major values) and the sparse
//! `coordinate` layout are supported. Files use 1-based indices; everything
//! returned from here is 0-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SketchError};
use crate::matrix::{DenseMatrix, Entry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub layout: Layout,
    pub n: usize,
    /// Number of stored values (`n * n` for the array layout).
    pub entries: usize,
}

/// Sequential reader yielding one entry per stored value.
///
/// The header and size line are consumed on construction; after that each
/// call to `next` reads exactly one data line.
pub struct EntryReader<R> {
    reader: R,
    header: Header,
    line_no: usize,
    produced: usize,
    buf: String,
}

impl EntryReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> EntryReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let mut buf = String::new();
        let mut line_no = 0;

        line_no += 1;
        if reader.read_line(&mut buf)? == 0 {
            return Err(parse_err(line_no, "empty file"));
        }
        let layout = parse_banner(&buf, line_no)?;

        // skip comments and blank lines up to the size line
        loop {
            buf.clear();
            line_no += 1;
            if reader.read_line(&mut buf)? == 0 {
                return Err(parse_err(line_no, "missing size line"));
            }
            let t = buf.trim();
            if !t.is_empty() && !t.starts_with('%') {
                break;
            }
        }
        let dims: Vec<usize> = buf
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(line_no, &format!("bad size line: {e}")))?;

        let header = match (layout, dims.as_slice()) {
            (Layout::Array, &[rows, cols]) => {
                check_square(rows, cols)?;
                Header {
                    layout,
                    n: rows,
                    entries: rows * cols,
                }
            }
            (Layout::Coordinate, &[rows, cols, nnz]) => {
                check_square(rows, cols)?;
                Header {
                    layout,
                    n: rows,
                    entries: nnz,
                }
            }
            _ => return Err(parse_err(line_no, "wrong number of fields on size line")),
        };

        Ok(EntryReader {
            reader,
            header,
            line_no,
            produced: 0,
            buf,
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    pub fn n(&self) -> usize {
        self.header.n
    }

    fn read_data_line(&mut self) -> Result<()> {
        loop {
            self.buf.clear();
            self.line_no += 1;
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Err(parse_err(
                    self.line_no,
                    &format!(
                        "unexpected end of file after {} of {} entries",
                        self.produced, self.header.entries
                    ),
                ));
            }
            let t = self.buf.trim();
            if !t.is_empty() && !t.starts_with('%') {
                return Ok(());
            }
        }
    }

    fn next_entry(&mut self) -> Result<Entry> {
        self.read_data_line()?;
        let n = self.header.n;
        let line = self.line_no;
        let mut fields = self.buf.split_whitespace();
        let entry = match self.header.layout {
            Layout::Array => {
                let k = self.produced;
                let value = parse_value(fields.next(), line)?;
                // column-major
                Entry::new(k % n, k / n, value)
            }
            Layout::Coordinate => {
                let i = parse_index(fields.next(), n, line)?;
                let j = parse_index(fields.next(), n, line)?;
                let value = parse_value(fields.next(), line)?;
                Entry::new(i, j, value)
            }
        };
        if fields.next().is_some() {
            return Err(parse_err(line, "trailing fields"));
        }
        Ok(entry)
    }
}

impl<R: BufRead> Iterator for EntryReader<R> {
    type Item = Result<Entry>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.produced >= self.header.entries {
            return None;
        }
        let e = self.next_entry();
        self.produced += 1;
        if e.is_err() {
            // stop after the first error
            self.produced = self.header.entries;
        }
        Some(e)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.header.entries - self.produced;
        (0, Some(left))
    }
}

fn parse_err(line: usize, message: &str) -> SketchError {
    SketchError::Parse {
        line,
        message: message.to_string(),
    }
}

fn check_square(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || rows != cols {
        return Err(SketchError::NotSquare { rows, cols });
    }
    Ok(())
}

fn parse_banner(line: &str, line_no: usize) -> Result<Layout> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(parse_err(line_no, "header must start with %%MatrixMarket"));
    }
    if tokens.len() != 5 || tokens[1] != "matrix" {
        return Err(parse_err(
            line_no,
            "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'",
        ));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_err(line_no, &format!("unsupported layout '{other}'"))),
    };
    if !matches!(tokens[3].as_str(), "real" | "integer") {
        return Err(parse_err(
            line_no,
            &format!("unsupported field '{}', expected real", tokens[3]),
        ));
    }
    if tokens[4] != "general" {
        return Err(parse_err(
            line_no,
            &format!("unsupported symmetry '{}', expected general", tokens[4]),
        ));
    }
    Ok(layout)
}

fn parse_index(tok: Option<&str>, n: usize, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing index"))?;
    let idx: usize = tok
        .parse()
        .map_err(|_| parse_err(line, &format!("bad index '{tok}'")))?;
    if idx == 0 || idx > n {
        return Err(parse_err(line, &format!("index {idx} outside 1..={n}")));
    }
    Ok(idx - 1)
}

fn parse_value(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing value"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, &format!("bad value '{tok}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, &format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

/// Reads a whole file into a dense matrix. Coordinate files may not repeat
/// a coordinate.
pub fn read_dense<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let entries = EntryReader::new(reader)?;
    let n = entries.n();
    let mut seen = vec![false; n * n];
    let mut data = vec![0.0; n * n];
    for e in entries {
        let e = e?;
        let k = e.row * n + e.col;
        if std::mem::replace(&mut seen[k], true) {
            return Err(SketchError::DuplicateEntry {
                row: e.row + 1,
                col: e.col + 1,
            });
        }
        data[k] = e.value;
    }
    DenseMatrix::new(n, data)
}

pub fn read_dense_file(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_dense(BufReader::new(File::open(path)?))
}

/// Reads a coordinate (or array) file into its dimension and 0-based triples.
pub fn read_triples<R: BufRead>(reader: R) -> Result<(usize, Vec<Entry>)> {
    let entries = EntryReader::new(reader)?;
    let n = entries.n();
    let triples = entries.collect::<Result<Vec<_>>>()?;
    Ok((n, triples))
}

pub fn read_triples_file(path: impl AsRef<Path>) -> Result<(usize, Vec<Entry>)> {
    read_triples(BufReader::new(File::open(path)?))
}

/// Writes `m` in the `array real general` layout.
pub fn write_dense<W: Write>(mut w: W, m: &DenseMatrix) -> Result<()> {
    let n = m.n();
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{n} {n}")?;
    for j in 0..n {
        for i in 0..n {
            writeln!(w, "{}", m.get(i, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dense_file(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    write_dense(BufWriter::new(File::create(path)?), m)
}

/// Writes 0-based triples in the `coordinate real general` layout, in the
/// order given.
pub fn write_coordinate<W: Write>(mut w: W, n: usize, triples: &[Entry]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{n} {n} {}", triples.len())?;
    for e in triples {
        writeln!(w, "{} {} {}", e.row + 1, e.col + 1, e.value)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coordinate_file(path: impl AsRef<Path>, n: usize, triples: &[Entry]) -> Result<()> {
    write_coordinate(BufWriter::new(File::create(path)?), n, triples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn reads_array_column_major() {
        let text = "%%MatrixMarket matrix array real general\n% comment\n2 2\n1\n3\n2\n4\n";
        let m = read_dense(Cursor::new(text)).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn reads_coordinate_one_based() {
        let text = "%%MatrixMarket matrix coordinate real general\n3 3 2\n1 1 5.0\n3 2 -1.5e0\n";
        let m = read_dense(Cursor::new(text)).unwrap();
        assert_eq!(m.get(0, 0), 5.0);
        assert_eq!(m.get(2, 1), -1.5);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn dense_round_trip() {
        let m = DenseMatrix::from_rows(&[vec![0.1, -2.0], vec![1e-300, 7.25]]).unwrap();
        let mut buf = Vec::new();
        write_dense(&mut buf, &m).unwrap();
        assert_eq!(read_dense(Cursor::new(buf)).unwrap(), m);
    }

    #[test]
    fn coordinate_writer_format() {
        let mut buf = Vec::new();
        write_coordinate(&mut buf, 4, &[Entry::new(0, 3, 0.5)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "%%MatrixMarket matrix coordinate real general\n4 4 1\n1 4 0.5\n"
        );
    }

    #[test]
    fn rejects_malformed() {
        let cases = [
            "",
            "MatrixMarket matrix array real general\n1 1\n1\n",
            "%%MatrixMarket matrix array complex general\n1 1\n1\n",
            "%%MatrixMarket matrix array real symmetric\n1 1\n1\n",
            "%%MatrixMarket matrix array real general\n2 3\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
            "%%MatrixMarket matrix array real general\n1 1\nnan\n",
        ];
        for c in cases {
            assert!(read_dense(Cursor::new(c)).is_err(), "accepted: {c:?}");
        }
    }

    #[test]
    fn reader_reports_header() {
        let text = "%%MatrixMarket matrix coordinate real general\n5 5 0\n";
        let r = EntryReader::new(Cursor::new(text)).unwrap();
        assert_eq!(
            r.header(),
            Header {
                layout: Layout::Coordinate,
                n: 5,
                entries: 0
            }
        );
        assert_eq!(r.count(), 0);
    }
}
