//! Sparse spectral-norm sketches of dense square matrices.
//!
//! A matrix `A` is thresholded at `eps/(2n)` and then `s` entries are drawn
//! i.i.d. with probability proportional to their squared magnitude. The
//! rescaled average `Ã` satisfies `||A - Ã|| <= eps` with probability at
//! least `1 - 1/n` when `s = ceil(28 n ln(sqrt(2) n) ||A||_F^2 / eps^2)`.
//!
//! - [`matrix`]: dense matrices, norms, power iteration
//! - [`matrix_market`]: file I/O
//! - [`sparsifier`]: in-memory thresholding and sampling
//! - [`select`]: one-pass sampling over an entry stream
//! - [`analysis`]: tail bounds, exact moments, Monte Carlo experiments
//! - [`cli`]: the `spsketch` command-line tool

pub mod analysis;
pub mod cli;
pub mod error;
pub mod matrix;
pub mod matrix_market;
pub mod rng;
pub mod select;
pub mod sparsifier;

pub use analysis::{
    bernstein_tail, exact_second_moment, lemma4_sample_size, measure_error, run_experiment,
    verify_zero_mean, BernsteinParams, ExperimentReport, MomentDiagnostics,
};
pub use error::{Result, SketchError};
pub use matrix::{
    frobenius_norm, spectral_norm, stable_rank, DenseMatrix, Entry, PowerIterationConfig,
    SpectralEstimate,
};
pub use select::{one_pass_sparsify, run_select, EntryStream, OnePassSampler, SelectorState};
pub use sparsifier::{
    build_plan, sample_size, sparsify, sparsify_relative, threshold_zero, SamplingPlan,
    SparseSketch,
};
