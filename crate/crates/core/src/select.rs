//! One-pass weighted selection.
//!
//! A [`SelectorState`] keeps a single candidate while entries stream past:
//! each entry with `A_ij^2 > eps^2/(4n^2)` adds its square to the running
//! weight `N` and replaces the candidate with probability `A_ij^2 / N`. At the
//! end, the candidate is `(i, j)` with probability `Â_ij^2 / ||Â||_F^2`.
//! [`OnePassSampler`] runs `s` independent copies side by side.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_epsilon, Result, SketchError};
use crate::matrix::{DenseMatrix, Entry};
use crate::matrix_market::EntryReader;
use crate::rng::{self, SketchRng};
use crate::sparsifier::{threshold_for, SketchAccumulator, SparseSketch};

/// Validating, read-counting adapter over a sequence of entries.
///
/// Rejects out-of-range indices and repeated coordinates. The read counter
/// counts items pulled from the underlying source.
pub struct EntryStream<I> {
    n: usize,
    items: I,
    reads: usize,
    seen: Option<HashSet<(usize, usize)>>,
}

impl<I> EntryStream<I>
where
    I: Iterator<Item = Result<Entry>>,
{
    pub fn new(n: usize, items: I) -> Self {
        EntryStream {
            n,
            items,
            reads: 0,
            seen: Some(HashSet::new()),
        }
    }

    /// Skips the duplicate-coordinate check, which costs memory proportional
    /// to the number of entries.
    pub fn without_duplicate_check(mut self) -> Self {
        self.seen = None;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reads(&self) -> usize {
        self.reads
    }
}

impl EntryStream<std::vec::IntoIter<Result<Entry>>> {
    pub fn from_entries(n: usize, entries: Vec<Entry>) -> Self {
        let items: Vec<Result<Entry>> = entries.into_iter().map(Ok).collect();
        EntryStream::new(n, items.into_iter())
    }

    /// All `n^2` entries of `m`, zeros included, row-major.
    pub fn from_matrix(m: &DenseMatrix) -> Self {
        Self::from_entries(m.n(), m.entries().collect())
    }
}

impl<R: BufRead> EntryStream<EntryReader<R>> {
    pub fn from_reader(reader: EntryReader<R>) -> Self {
        let n = reader.n();
        EntryStream::new(n, reader)
    }
}

impl EntryStream<EntryReader<BufReader<File>>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_reader(EntryReader::open(path)?))
    }
}

impl<I> Iterator for EntryStream<I>
where
    I: Iterator<Item = Result<Entry>>,
{
    type Item = Result<Entry>;

    fn next(&mut self) -> Option<Self::Item> {
        let item = self.items.next()?;
        self.reads += 1;
        Some(item.and_then(|e| {
            if e.row >= self.n || e.col >= self.n {
                return Err(SketchError::IndexOutOfRange {
                    row: e.row,
                    col: e.col,
                    n: self.n,
                });
            }
            if let Some(seen) = self.seen.as_mut() {
                if !seen.insert((e.row, e.col)) {
                    return Err(SketchError::DuplicateEntry {
                        row: e.row + 1,
                        col: e.col + 1,
                    });
                }
            }
            Ok(e)
        }))
    }
}

/// Current candidate of a selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Running state of one selector copy.
#[derive(Debug, Clone)]
pub struct SelectorState {
    weight: f64,
    chosen: Option<Selection>,
    threshold_sq: f64,
    rng: SketchRng,
}

impl SelectorState {
    pub fn new(threshold_sq: f64, rng: SketchRng) -> Self {
        SelectorState {
            weight: 0.0,
            chosen: None,
            threshold_sq,
            rng,
        }
    }

    /// Selector for an `n x n` stream at accuracy `epsilon`, drawing from
    /// copy `copy` of `seed`.
    pub fn for_stream(n: usize, epsilon: f64, seed: u64, copy: u64) -> Self {
        let t = threshold_for(n, epsilon);
        Self::new(t * t, rng::substream(seed, copy))
    }

    pub fn step(&mut self, e: &Entry) {
        let w = e.value * e.value;
        if w <= self.threshold_sq {
            return;
        }
        self.weight += w;
        if self.rng.random::<f64>() < w / self.weight {
            self.chosen = Some(Selection {
                row: e.row,
                col: e.col,
                value: e.value,
            });
        }
    }

    /// `N`, the sum of squares of every qualifying entry seen so far.
    pub fn accumulated_weight(&self) -> f64 {
        self.weight
    }

    pub fn selection(&self) -> Option<Selection> {
        self.chosen
    }

    pub fn threshold_sq(&self) -> f64 {
        self.threshold_sq
    }

    /// `S^2 / N` for the current candidate.
    pub fn selection_probability(&self) -> Option<f64> {
        self.chosen.map(|c| c.value * c.value / self.weight)
    }
}

/// Runs a single selector over the whole stream.
///
/// A stream with no qualifying entry returns a state with no selection and
/// `N = 0`.
pub fn run_select<I>(stream: &mut EntryStream<I>, epsilon: f64, seed: u64) -> Result<SelectorState>
where
    I: Iterator<Item = Result<Entry>>,
{
    check_epsilon(epsilon)?;
    let mut state = SelectorState::for_stream(stream.n(), epsilon, seed, 0);
    for e in stream {
        state.step(&e?);
    }
    Ok(state)
}

/// `s` selector copies fed from one pass over the entries.
pub struct OnePassSampler {
    n: usize,
    selectors: Vec<SelectorState>,
}

impl OnePassSampler {
    pub fn new(n: usize, epsilon: f64, s: u64, seed: u64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if s == 0 {
            return Err(SketchError::NonPositive {
                name: "s",
                value: 0.0,
            });
        }
        let selectors = (0..s)
            .map(|k| SelectorState::for_stream(n, epsilon, seed, k))
            .collect();
        Ok(OnePassSampler { n, selectors })
    }

    pub fn feed(&mut self, e: &Entry) {
        for sel in &mut self.selectors {
            sel.step(e);
        }
    }

    /// Number of selector records held, always `s`.
    pub fn memory_records(&self) -> usize {
        self.selectors.len()
    }

    pub fn selectors(&self) -> &[SelectorState] {
        &self.selectors
    }

    /// Builds the sketch with `p = S^2 / N` for each copy's pick. Returns the
    /// empty sketch when nothing qualified.
    pub fn finish(self, seed: u64) -> SparseSketch {
        let mut acc = SketchAccumulator::new(self.n, self.selectors.len() as u64);
        for sel in &self.selectors {
            if let (Some(c), Some(p)) = (sel.selection(), sel.selection_probability()) {
                acc.add(c.row, c.col, c.value / p);
            }
        }
        acc.finish(seed)
    }
}

/// Streams every entry once through `s` selector copies and assembles the
/// sketch.
pub fn one_pass_sparsify<I>(
    stream: &mut EntryStream<I>,
    epsilon: f64,
    s: u64,
    seed: u64,
) -> Result<SparseSketch>
where
    I: Iterator<Item = Result<Entry>>,
{
    let mut sampler = OnePassSampler::new(stream.n(), epsilon, s, seed)?;
    for e in stream {
        sampler.feed(&e?);
    }
    Ok(sampler.finish(seed))
}
