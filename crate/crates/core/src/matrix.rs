//! Dense square matrices, norms and spectral-norm estimation.
//!
//! Indices are 0-based everywhere inside the crate. Conversion to the
//! 1-based Matrix Market convention happens only in [`crate::matrix_market`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SketchError};
use crate::rng;

/// A single matrix entry `(row, col, value)` with 0-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Entry {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Entry { row, col, value }
    }
}

/// An `n x n` real matrix stored row-major. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data of length `n * n`.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(SketchError::NotSquare { rows: 0, cols: 0 });
        }
        if data.len() != n * n {
            return Err(SketchError::WrongLength {
                expected: n * n,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(SketchError::NonFinite {
                row: k / n,
                col: k % n,
            });
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![0.0; n * n])
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::new(n, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(SketchError::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(n, rows.concat())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::new(n, data)
    }

    /// Builds a matrix from 0-based entries; repeated coordinates are summed.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = Entry>) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for e in entries {
            if e.row >= n || e.col >= n {
                return Err(SketchError::IndexOutOfRange {
                    row: e.row,
                    col: e.col,
                    n,
                });
            }
            data[e.row * n + e.col] += e.value;
        }
        Self::new(n, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Row-major iterator over every entry, zeros included.
    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, &v)| Entry::new(k / n, k % n, v))
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.data.iter().map(|v| c * v).collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        self.check_same_dim(other)?;
        Self::new(
            self.n,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        self.check_same_dim(other)?;
        Self::new(
            self.n,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        DenseMatrix { n, data }
    }

    /// `self * other^T`.
    pub fn mul_transpose(&self, other: &DenseMatrix) -> Result<Self> {
        self.check_same_dim(other)?;
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let ri = self.row(i);
            for j in 0..n {
                data[i * n + j] = dot(ri, other.row(j));
            }
        }
        Self::new(n, data)
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// `y = self^T * x`.
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, &a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
    }

    pub(crate) fn check_same_dim(&self, other: &DenseMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(SketchError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Settings for the power-iteration spectral-norm estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIterationConfig {
    pub max_iterations: usize,
    /// Relative change in the Rayleigh quotient below which iteration stops.
    pub tolerance: f64,
    /// Seed for the random start vector.
    pub seed: u64,
}

impl PowerIterationConfig {
    /// Defaults for an `n x n` matrix: tolerance `1e-10`, `10n + 100` iterations.
    pub fn for_dimension(n: usize) -> Self {
        PowerIterationConfig {
            max_iterations: 10 * n + 100,
            tolerance: 1e-10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(SketchError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || !self.tolerance.is_finite() {
            return Err(SketchError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Result of a spectral-norm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.frobenius_norm()
}

/// Largest singular value of `m` by power iteration on `m^T m`.
///
/// The returned value is `||m x||` for the final unit iterate `x`, so it never
/// exceeds the true spectral norm. If the iteration budget runs out before the
/// Rayleigh quotient settles, the estimate is still returned with
/// `converged == false`.
pub fn spectral_norm(m: &DenseMatrix, cfg: &PowerIterationConfig) -> Result<SpectralEstimate> {
    cfg.validate()?;
    let n = m.n();
    if m.is_zero() {
        return Ok(SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut rng = rng::seeded(cfg.seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut lambda = 0.0_f64;

    for it in 1..=cfg.max_iterations {
        m.mul_vec(&x, &mut y);
        let rayleigh = dot(&y, &y);
        m.tr_mul_vec(&y, &mut z);
        let nz = norm2(&z);

        if it > 1 && (rayleigh - lambda).abs() <= cfg.tolerance * rayleigh {
            return Ok(SpectralEstimate {
                value: rayleigh.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        lambda = rayleigh;
        if nz == 0.0 {
            // start vector fell in the null space
            return Ok(SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            });
        }
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = zi / nz;
        }
    }

    m.mul_vec(&x, &mut y);
    Ok(SpectralEstimate {
        value: lambda.max(dot(&y, &y)).sqrt(),
        iterations: cfg.max_iterations,
        converged: false,
    })
}

/// `||m||_F^2 / ||m||^2`.
pub fn stable_rank(m: &DenseMatrix, cfg: &PowerIterationConfig) -> Result<f64> {
    if m.is_zero() {
        return Err(SketchError::StableRankUndefined);
    }
    let sigma = spectral_norm(m, cfg)?.value;
    Ok(m.frobenius_norm_sq() / (sigma * sigma))
}
