//! Bound evaluators, exact moment computations and the Monte Carlo harness.
//!
//! With `M_t = (Â_ij / p_ij) e_i e_j^T - Â` for the draw `(i, j)`, the sketch
//! error is `Ã - Â = (1/s) sum_t M_t`. This module evaluates the matrix
//! Bernstein tail for that average, the almost-sure bound on `||M_t||`, and
//! the exact second moments `E(M_t M_t^T)`, `E(M_t^T M_t)`.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_epsilon, check_positive, Result, SketchError};
use crate::matrix::{spectral_norm, DenseMatrix, PowerIterationConfig};
use crate::sparsifier::{self, build_plan, threshold_zero, SparseSketch};

/// Largest dimension accepted by the enumeration oracles.
pub const MAX_ENUMERATION_N: usize = 64;

/// Inputs to the matrix Bernstein tail `2n exp(-(s tau^2 / 2) / (rho^2 + gamma tau / 3))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinParams {
    pub s: u64,
    pub tau: f64,
    pub rho_sq: f64,
    pub gamma: f64,
    pub n: usize,
}

impl BernsteinParams {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(SketchError::NonPositive {
                name: "s",
                value: 0.0,
            });
        }
        if self.n == 0 {
            return Err(SketchError::NonPositive {
                name: "n",
                value: 0.0,
            });
        }
        check_positive("tau", self.tau)?;
        check_positive("rho_sq", self.rho_sq)?;
        check_positive("gamma", self.gamma)?;
        Ok(())
    }

    /// Parameters for the sketch error `||Â - Ã||` at accuracy `eps`:
    /// `tau = eps/2`, `gamma = 4n||Â||_F^2/eps`, `rho^2 = n||Â||_F^2`.
    pub fn for_sketch(n: usize, frob_sq_hat: f64, epsilon: f64, s: u64) -> Self {
        BernsteinParams {
            s,
            tau: epsilon / 2.0,
            rho_sq: n as f64 * frob_sq_hat,
            gamma: draw_norm_gamma(n, frob_sq_hat, epsilon),
            n,
        }
    }
}

/// Failure-probability bound, clamped to `[0, 1]`.
pub fn bernstein_tail(p: &BernsteinParams) -> Result<f64> {
    p.validate()?;
    let exponent = -(p.s as f64 * p.tau * p.tau / 2.0) / (p.rho_sq + p.gamma * p.tau / 3.0);
    Ok((2.0 * p.n as f64 * exponent.exp()).min(1.0))
}

/// `ceil(14 n eps^-2 ||A||_F^2 ln(2n / delta))`.
pub fn lemma4_sample_size(n: usize, frob_norm_sq: f64, epsilon: f64, delta: f64) -> Result<u64> {
    if n == 0 {
        return Err(SketchError::NonPositive {
            name: "n",
            value: 0.0,
        });
    }
    check_positive("frob_norm_sq", frob_norm_sq)?;
    check_epsilon(epsilon)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SketchError::InvalidDelta(delta));
    }
    let nf = n as f64;
    let raw = 14.0 * nf * frob_norm_sq / (epsilon * epsilon) * (2.0 * nf / delta).ln();
    Ok(raw.ceil().max(1.0) as u64)
}

/// `4 n ||Â||_F^2 / eps`, the almost-sure bound on `||M_t||`.
pub fn draw_norm_gamma(n: usize, frob_sq_hat: f64, epsilon: f64) -> f64 {
    4.0 * n as f64 * frob_sq_hat / epsilon
}

/// `||Â||_F^2 / |Â_ij| + ||Â||_F`, which bounds `||M_t||` for the draw `(i, j)`.
pub fn draw_norm_bound(frob_sq_hat: f64, entry: f64) -> f64 {
    frob_sq_hat / entry.abs() + frob_sq_hat.sqrt()
}

/// Exact second moments of `M_t` by closed form and by enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentDiagnostics {
    pub n: usize,
    pub frob_norm_sq: f64,
    /// Non-zeros in each row of `Â`.
    pub row_nnz: Vec<usize>,
    /// Non-zeros in each column of `Â`.
    pub col_nnz: Vec<usize>,
    /// `||Â||_F^2 diag(row_nnz) - Â Â^T`.
    pub closed_form: Vec<Vec<f64>>,
    /// `sum p_ij X_ij X_ij^T` over the support, `X_ij = (Â_ij/p_ij) e_i e_j^T - Â`.
    pub enumerated: Vec<Vec<f64>>,
    /// `||Â||_F^2 diag(col_nnz) - Â^T Â`.
    pub closed_form_transpose: Vec<Vec<f64>>,
    pub enumerated_transpose: Vec<Vec<f64>>,
    /// `||closed - enumerated||_F / ||closed||_F` (absolute when the closed form vanishes).
    pub relative_discrepancy: f64,
    pub relative_discrepancy_transpose: f64,
    pub spectral_norm: f64,
    pub spectral_norm_transpose: f64,
    pub spectral_converged: bool,
    /// `n ||Â||_F^2`.
    pub variance_bound: f64,
    /// Largest per-draw bound on `||M_t||` over the support.
    pub gamma_max_over_support: f64,
}

impl MomentDiagnostics {
    pub fn agrees(&self, tol: f64) -> bool {
        self.relative_discrepancy <= tol && self.relative_discrepancy_transpose <= tol
    }

    pub fn within_variance_bound(&self, slack: f64) -> bool {
        self.spectral_norm <= self.variance_bound + slack
            && self.spectral_norm_transpose <= self.variance_bound + slack
    }
}

fn check_enumerable(a_hat: &DenseMatrix) -> Result<()> {
    if a_hat.n() > MAX_ENUMERATION_N {
        return Err(SketchError::TooLarge {
            n: a_hat.n(),
            max: MAX_ENUMERATION_N,
        });
    }
    if a_hat.is_zero() {
        return Err(SketchError::ZeroMatrix("moment enumeration"));
    }
    Ok(())
}

/// `||Â||_F^2 diag(nnz per row) - Â Â^T`.
pub fn closed_form_second_moment(a_hat: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a_hat.n();
    let f = a_hat.frobenius_norm_sq();
    let mut m = a_hat.mul_transpose(a_hat)?.scale(-1.0)?;
    let diag: Vec<f64> = (0..n)
        .map(|i| f * a_hat.row(i).iter().filter(|&&v| v != 0.0).count() as f64)
        .collect();
    m = m.add(&DenseMatrix::from_diagonal(&diag)?)?;
    Ok(m)
}

/// Enumerates `E(X X^T)` over every atom of the sampling distribution,
/// forming each `X` densely.
pub fn enumerated_second_moment(a_hat: &DenseMatrix) -> Result<DenseMatrix> {
    check_enumerable(a_hat)?;
    let n = a_hat.n();
    let f = a_hat.frobenius_norm_sq();
    let mut acc = vec![0.0; n * n];
    let mut x = vec![0.0; n * n];
    for e in a_hat.entries().filter(|e| e.value != 0.0) {
        let p = e.value * e.value / f;
        for (xk, &ak) in x.iter_mut().zip(a_hat.as_slice()) {
            *xk = -ak;
        }
        x[e.row * n + e.col] += e.value / p;
        for i in 0..n {
            let ri = &x[i * n..(i + 1) * n];
            for j in 0..n {
                let rj = &x[j * n..(j + 1) * n];
                let dot: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                acc[i * n + j] += p * dot;
            }
        }
    }
    DenseMatrix::new(n, acc)
}

/// `sum p_ij X_ij` over the support; identically zero in exact arithmetic.
pub fn enumerated_mean(a_hat: &DenseMatrix) -> Result<DenseMatrix> {
    check_enumerable(a_hat)?;
    let n = a_hat.n();
    let f = a_hat.frobenius_norm_sq();
    let mut acc = vec![0.0; n * n];
    for e in a_hat.entries().filter(|e| e.value != 0.0) {
        let p = e.value * e.value / f;
        for (ak, &v) in acc.iter_mut().zip(a_hat.as_slice()) {
            *ak -= p * v;
        }
        acc[e.row * n + e.col] += p * (e.value / p);
    }
    DenseMatrix::new(n, acc)
}

/// Checks `E(M_t) = 0` by enumeration, within `1e-12` Frobenius (relative to
/// `||Â||_F`).
pub fn verify_zero_mean(a_hat: &DenseMatrix) -> Result<bool> {
    let mean = enumerated_mean(a_hat)?;
    Ok(mean.frobenius_norm() <= 1e-12 * a_hat.frobenius_norm().max(1.0))
}

fn relative_gap(closed: &DenseMatrix, other: &DenseMatrix) -> Result<f64> {
    let diff = closed.sub(other)?.frobenius_norm();
    let scale = closed.frobenius_norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

pub fn exact_second_moment(a_hat: &DenseMatrix) -> Result<MomentDiagnostics> {
    check_enumerable(a_hat)?;
    let n = a_hat.n();
    let f = a_hat.frobenius_norm_sq();
    let a_t = a_hat.transpose();

    let closed = closed_form_second_moment(a_hat)?;
    let enumerated = enumerated_second_moment(a_hat)?;
    // E(M^T M) for Â is E(M M^T) for Â^T
    let closed_t = closed_form_second_moment(&a_t)?;
    let enumerated_t = enumerated_second_moment(&a_t)?;

    // second moments often have near-tied top eigenvalues
    let cfg = PowerIterationConfig {
        max_iterations: 200_000,
        tolerance: 1e-13,
        ..PowerIterationConfig::for_dimension(n)
    };
    let sigma = spectral_norm(&closed, &cfg)?;
    let sigma_t = spectral_norm(&closed_t, &cfg)?;
    let row_nnz = (0..n)
        .map(|i| a_hat.row(i).iter().filter(|&&v| v != 0.0).count())
        .collect();
    let col_nnz = (0..n)
        .map(|j| a_t.row(j).iter().filter(|&&v| v != 0.0).count())
        .collect();
    let gamma_max_over_support = a_hat
        .as_slice()
        .iter()
        .filter(|&&v| v != 0.0)
        .map(|&v| draw_norm_bound(f, v))
        .fold(0.0, f64::max);

    Ok(MomentDiagnostics {
        n,
        frob_norm_sq: f,
        row_nnz,
        col_nnz,
        relative_discrepancy: relative_gap(&closed, &enumerated)?,
        relative_discrepancy_transpose: relative_gap(&closed_t, &enumerated_t)?,
        spectral_norm: sigma.value,
        spectral_norm_transpose: sigma_t.value,
        spectral_converged: sigma.converged && sigma_t.converged,
        closed_form: closed.to_rows(),
        enumerated: enumerated.to_rows(),
        closed_form_transpose: closed_t.to_rows(),
        enumerated_transpose: enumerated_t.to_rows(),
        variance_bound: n as f64 * f,
        gamma_max_over_support,
    })
}

/// `||A - Ã||` measured with the power-iteration estimator.
pub fn measure_error(
    a: &DenseMatrix,
    sketch: &SparseSketch,
    cfg: &PowerIterationConfig,
) -> Result<f64> {
    if a.n() != sketch.n {
        return Err(SketchError::DimensionMismatch {
            expected: a.n(),
            found: sketch.n,
        });
    }
    Ok(spectral_norm(&a.sub(&sketch.to_dense())?, cfg)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub epsilon: f64,
    pub trials: usize,
    pub base_seed: u64,
    /// Overrides the default budget from the sample-size formula.
    pub samples: Option<u64>,
    pub power: PowerIterationConfig,
}

impl ExperimentOptions {
    pub fn new(n: usize, epsilon: f64, trials: usize, base_seed: u64) -> Self {
        ExperimentOptions {
            epsilon,
            trials,
            base_seed,
            samples: None,
            power: PowerIterationConfig::for_dimension(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDescriptor {
    pub n: usize,
    pub frob_norm_sq: f64,
    pub thresholded_frob_norm_sq: f64,
    pub thresholded_nnz: usize,
}

/// Outcome of one sparsification trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub s: u64,
    /// `||A - Ã||`.
    pub error: f64,
    /// `||Â - Ã||`.
    pub sampling_error: f64,
    /// `||A - Â||_F`.
    pub threshold_error: f64,
    pub nnz: usize,
    /// Largest per-draw bound on `||M_t||` among this trial's draws.
    pub max_draw_bound: f64,
    /// Draws whose per-draw bound exceeded `gamma + 1e-9`.
    pub gamma_violations: usize,
    pub converged: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub matrix: MatrixDescriptor,
    pub config: ExperimentOptions,
    pub epsilon: f64,
    pub s: u64,
    pub trials: usize,
    pub per_trial_errors: Vec<f64>,
    /// Fraction of trials with error strictly above `epsilon`.
    pub empirical_failure_rate: f64,
    /// `1/n`.
    pub theoretical_failure_bound: f64,
    /// Bernstein tail at `tau = eps/2` for the realized `Â` (1 when `Â = 0`).
    pub bernstein_tail_bound: f64,
    /// `4n ||Â||_F^2 / eps`.
    pub gamma_bound: f64,
    pub gamma_realized: f64,
    pub gamma_violations: usize,
    pub seeds: Vec<u64>,
    pub records: Vec<TrialRecord>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per trial: `seed,s,error,pass`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            seed: u64,
            s: u64,
            error: f64,
            pass: bool,
        }
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(Row {
                seed: r.seed,
                s: r.s,
                error: r.error,
                pass: r.passed,
            })?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs `trials` sparsifications with seeds `base_seed + t` and measures each.
pub fn run_experiment(
    a: &DenseMatrix,
    epsilon: f64,
    trials: usize,
    base_seed: u64,
) -> Result<ExperimentReport> {
    run_experiment_with(a, &ExperimentOptions::new(a.n(), epsilon, trials, base_seed))
}

pub fn run_experiment_with(a: &DenseMatrix, opts: &ExperimentOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let epsilon = opts.epsilon;
    check_epsilon(epsilon)?;
    opts.power.validate()?;
    if opts.trials == 0 {
        return Err(SketchError::NonPositive {
            name: "trials",
            value: 0.0,
        });
    }
    let n = a.n();
    let frob_sq = a.frobenius_norm_sq();
    let s = match opts.samples {
        Some(s) => s,
        None if frob_sq > 0.0 => sparsifier::sample_size(n, frob_sq, epsilon)?,
        None => 1,
    };
    let a_hat = threshold_zero(a, epsilon)?;
    let threshold_error = a.sub(&a_hat)?.frobenius_norm();
    let plan = build_plan(&a_hat, epsilon, s)?;
    let frob_sq_hat = plan.total_weight();
    let gamma_bound = draw_norm_gamma(n, frob_sq_hat, epsilon);

    let records = (0..opts.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialRecord> {
            let seed = opts.base_seed.wrapping_add(t as u64);
            let draws = plan.draw_indices(seed);
            let mut max_draw_bound = 0.0_f64;
            let mut gamma_violations = 0;
            for &k in &draws {
                let b = draw_norm_bound(frob_sq_hat, plan.support()[k].value);
                max_draw_bound = max_draw_bound.max(b);
                if b > gamma_bound + 1e-9 {
                    gamma_violations += 1;
                }
            }
            let sketch = plan.assemble(&draws, seed);
            let dense = sketch.to_dense();
            let est = spectral_norm(&a.sub(&dense)?, &opts.power)?;
            let sampling = spectral_norm(&a_hat.sub(&dense)?, &opts.power)?;
            Ok(TrialRecord {
                trial: t,
                seed,
                s,
                error: est.value,
                sampling_error: sampling.value,
                threshold_error,
                nnz: sketch.nnz(),
                max_draw_bound,
                gamma_violations,
                converged: est.converged && sampling.converged,
                passed: est.value <= epsilon,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let failures = records.iter().filter(|r| !r.passed).count();
    let bernstein_tail_bound = if frob_sq_hat > 0.0 {
        bernstein_tail(&BernsteinParams::for_sketch(n, frob_sq_hat, epsilon, s))?
    } else {
        1.0
    };

    Ok(ExperimentReport {
        matrix: MatrixDescriptor {
            n,
            frob_norm_sq: frob_sq,
            thresholded_frob_norm_sq: frob_sq_hat,
            thresholded_nnz: plan.support().len(),
        },
        config: opts.clone(),
        epsilon,
        s,
        trials: opts.trials,
        per_trial_errors: records.iter().map(|r| r.error).collect(),
        empirical_failure_rate: failures as f64 / opts.trials as f64,
        theoretical_failure_bound: 1.0 / n as f64,
        bernstein_tail_bound,
        gamma_bound,
        gamma_realized: records.iter().map(|r| r.max_draw_bound).fold(0.0, f64::max),
        gamma_violations: records.iter().map(|r| r.gamma_violations).sum(),
        seeds: records.iter().map(|r| r.seed).collect(),
        records,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
