//! Threshold-then-sample sparsification.
//!
//! Entries with `|A_ij| <= eps/(2n)` are zeroed, giving `Â`. The sketch is the
//! average of `s` i.i.d. draws `(i, j)` with probability
//! `p_ij = Â_ij^2 / ||Â||_F^2`, each contributing `Â_ij / p_ij` at `(i, j)`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_epsilon, check_positive, Result, SketchError};
use crate::matrix::{spectral_norm, DenseMatrix, Entry, PowerIterationConfig};
use crate::rng;

/// `eps / (2n)`.
pub fn threshold_for(n: usize, epsilon: f64) -> f64 {
    epsilon / (2.0 * n as f64)
}

/// Zeroes every entry with `|A_ij| <= eps/(2n)`.
pub fn threshold_zero(a: &DenseMatrix, epsilon: f64) -> Result<DenseMatrix> {
    check_epsilon(epsilon)?;
    let t = threshold_for(a.n(), epsilon);
    let data = a
        .as_slice()
        .iter()
        .map(|&v| if v.abs() > t { v } else { 0.0 })
        .collect();
    DenseMatrix::new(a.n(), data)
}

/// Sample budget `ceil(28 n ln(sqrt(2) n) ||A||_F^2 / eps^2)`.
pub fn sample_size(n: usize, frob_norm_sq: f64, epsilon: f64) -> Result<u64> {
    if n == 0 {
        return Err(SketchError::NonPositive {
            name: "n",
            value: 0.0,
        });
    }
    check_positive("frob_norm_sq", frob_norm_sq)?;
    check_epsilon(epsilon)?;
    let nf = n as f64;
    let raw = 28.0 * nf * (std::f64::consts::SQRT_2 * nf).ln() * frob_norm_sq / (epsilon * epsilon);
    Ok(raw.ceil().max(1.0) as u64)
}

/// Sampling distribution over the non-zeros of a thresholded matrix.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    n: usize,
    epsilon: f64,
    threshold: f64,
    s: u64,
    total_weight: f64,
    /// `(row, col, Â_ij)` for every non-zero, row-major.
    support: Vec<Entry>,
    /// Running sums of `Â_ij^2` over `support`.
    cumulative: Vec<f64>,
}

/// Builds the plan for an already thresholded matrix.
///
/// Every non-zero of `a_hat` must exceed `eps/(2n)` in magnitude. An all-zero
/// `a_hat` yields an empty plan whose draws produce the empty sketch.
pub fn build_plan(a_hat: &DenseMatrix, epsilon: f64, s: u64) -> Result<SamplingPlan> {
    check_epsilon(epsilon)?;
    if s == 0 {
        return Err(SketchError::NonPositive {
            name: "s",
            value: 0.0,
        });
    }
    let n = a_hat.n();
    let threshold = threshold_for(n, epsilon);
    let mut support = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    for e in a_hat.entries().filter(|e| e.value != 0.0) {
        if e.value.abs() <= threshold {
            return Err(SketchError::NotThresholded {
                row: e.row + 1,
                col: e.col + 1,
                value: e.value,
                threshold,
            });
        }
        total += e.value * e.value;
        support.push(e);
        cumulative.push(total);
    }
    Ok(SamplingPlan {
        n,
        epsilon,
        threshold,
        s,
        total_weight: total,
        support,
        cumulative,
    })
}

impl SamplingPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    /// `||Â||_F^2`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[Entry] {
        &self.support
    }

    /// `(row, col, Â_ij^2)` in canonical order.
    pub fn weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.support
            .iter()
            .map(|e| (e.row, e.col, e.value * e.value))
    }

    /// `p_ij` of the `k`-th support entry.
    pub fn probability(&self, k: usize) -> f64 {
        let v = self.support[k].value;
        v * v / self.total_weight
    }

    /// Draws `s` support positions. Each draw consumes one uniform variate and
    /// inverts the cumulative weights by binary search.
    pub fn draw_indices(&self, seed: u64) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut rng = rng::seeded(seed);
        let last = self.support.len() - 1;
        (0..self.s)
            .map(|_| {
                let u = rng.random::<f64>() * self.total_weight;
                self.cumulative.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }

    /// `Â_ij / p_ij` for the `k`-th support entry, i.e. `||Â||_F^2 / Â_ij`.
    pub fn draw_value(&self, k: usize) -> f64 {
        self.total_weight / self.support[k].value
    }

    /// Aggregates drawn positions into a sketch.
    pub fn assemble(&self, draws: &[usize], seed: u64) -> SparseSketch {
        let mut acc = SketchAccumulator::new(self.n, self.s);
        for &k in draws {
            let e = &self.support[k];
            acc.add(e.row, e.col, self.draw_value(k));
        }
        acc.finish(seed)
    }

    pub fn sample(&self, seed: u64) -> SparseSketch {
        self.assemble(&self.draw_indices(seed), seed)
    }
}

/// The sparse sketch `Ã` as sorted, unique coordinate triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSketch {
    pub n: usize,
    /// Number of draws the sketch averages over.
    pub s: u64,
    pub seed: u64,
    pub triples: Vec<Entry>,
}

impl SparseSketch {
    pub fn empty(n: usize, s: u64, seed: u64) -> Self {
        SparseSketch {
            n,
            s,
            seed,
            triples: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.triples.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.triples
            .binary_search_by(|e| (e.row, e.col).cmp(&(row, col)))
            .map(|k| self.triples[k].value)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_entries(self.n, self.triples.iter().copied())
            .expect("sketch triples are in range and finite")
    }
}

/// Collects per-draw contributions `v` at `(i, j)`; the final value of a
/// coordinate hit `k` times is `k * v / s`.
pub(crate) struct SketchAccumulator {
    n: usize,
    s: u64,
    hits: BTreeMap<(usize, usize), (u64, f64)>,
}

impl SketchAccumulator {
    pub(crate) fn new(n: usize, s: u64) -> Self {
        SketchAccumulator {
            n,
            s,
            hits: BTreeMap::new(),
        }
    }

    pub(crate) fn add(&mut self, row: usize, col: usize, contribution: f64) {
        let slot = self.hits.entry((row, col)).or_insert((0, contribution));
        slot.0 += 1;
    }

    pub(crate) fn finish(self, seed: u64) -> SparseSketch {
        let s = self.s as f64;
        let triples = self
            .hits
            .into_iter()
            .map(|((i, j), (count, v))| Entry::new(i, j, count as f64 * v / s))
            .collect();
        SparseSketch {
            n: self.n,
            s: self.s,
            seed,
            triples,
        }
    }
}

/// Full pipeline with the default budget `s = sample_size(n, ||A||_F^2, eps)`.
///
/// The zero matrix has no defined budget; it yields an empty sketch with
/// `s = 0`.
pub fn sparsify(a: &DenseMatrix, epsilon: f64, seed: u64) -> Result<SparseSketch> {
    check_epsilon(epsilon)?;
    let frob_sq = a.frobenius_norm_sq();
    if frob_sq == 0.0 {
        return Ok(SparseSketch::empty(a.n(), 0, seed));
    }
    let s = sample_size(a.n(), frob_sq, epsilon)?;
    sparsify_with_samples(a, epsilon, s, seed)
}

/// Same as [`sparsify`] with an explicit sample budget.
pub fn sparsify_with_samples(
    a: &DenseMatrix,
    epsilon: f64,
    s: u64,
    seed: u64,
) -> Result<SparseSketch> {
    let a_hat = threshold_zero(a, epsilon)?;
    Ok(build_plan(&a_hat, epsilon, s)?.sample(seed))
}

/// Relative-error variant: `eps = eps_rel * ||A||`, then [`sparsify`].
///
/// Needs the spectral norm up front, so it cannot run in a single pass.
pub fn sparsify_relative(
    a: &DenseMatrix,
    epsilon_rel: f64,
    seed: u64,
    cfg: &PowerIterationConfig,
) -> Result<SparseSketch> {
    Ok(sparsify_relative_with_epsilon(a, epsilon_rel, seed, cfg)?.0)
}

/// [`sparsify_relative`] that also returns the absolute accuracy it used.
pub fn sparsify_relative_with_epsilon(
    a: &DenseMatrix,
    epsilon_rel: f64,
    seed: u64,
    cfg: &PowerIterationConfig,
) -> Result<(SparseSketch, f64)> {
    check_epsilon(epsilon_rel)?;
    if a.is_zero() {
        return Err(SketchError::ZeroMatrix(
            "relative-error sparsification (eps = eps_rel * ||A||)",
        ));
    }
    let epsilon = epsilon_rel * spectral_norm(a, cfg)?.value;
    Ok((sparsify(a, epsilon, seed)?, epsilon))
}
