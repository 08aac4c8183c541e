//! Command-line front end.
//!
//! Each `cmd_*` function is usable as a library call; the binary only parses
//! arguments, prints the outcome and maps errors to exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{self, ExperimentOptions, MomentDiagnostics};
use crate::error::{check_epsilon, SketchError};
use crate::matrix::{spectral_norm, PowerIterationConfig};
use crate::matrix_market::{read_dense_file, read_triples_file, write_coordinate_file};
use crate::select::{one_pass_sparsify, EntryStream};
use crate::sparsifier::{
    sample_size, sparsify, sparsify_relative_with_epsilon, sparsify_with_samples, threshold_for,
    SparseSketch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage,
    Io,
    Validation,
    VerificationFailed,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            ExitKind::Usage => 2,
            ExitKind::Io => 3,
            ExitKind::Validation => 4,
            ExitKind::VerificationFailed => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    fn verification(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::VerificationFailed,
            message: message.into(),
        }
    }
}

impl From<SketchError> for CliError {
    fn from(e: SketchError) -> Self {
        let kind = match e {
            SketchError::Io(_) | SketchError::Parse { .. } | SketchError::Csv(_) => ExitKind::Io,
            SketchError::Json(ref j) if j.is_io() => ExitKind::Io,
            _ => ExitKind::Validation,
        };
        let message = match e {
            SketchError::ZeroMatrix(what) => format!(
                "{what}: relative mode needs ||A|| > 0 to set eps = eps_rel * ||A||"
            ),
            other => other.to_string(),
        };
        CliError { kind, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        SketchError::Io(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonMode {
    Absolute,
    Relative,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CliConfig {
    /// Input matrix (Matrix Market, array or coordinate).
    #[arg(long)]
    pub input: PathBuf,

    /// Output path (sketch or report).
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Accuracy parameter; with --relative it is a fraction of ||A||.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Treat --epsilon as relative to the spectral norm (two passes).
    #[arg(long)]
    pub relative: bool,

    /// Sample budget s, overriding the default formula.
    #[arg(long = "samples")]
    pub s_override: Option<u64>,

    /// ||A||_F^2 supplied up front, for stream mode.
    #[arg(long = "frob-sq")]
    pub frob_sq: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of trials (experiment only).
    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    #[arg(long = "format", value_enum, default_value_t = ReportFormat::Json)]
    pub report_format: ReportFormat,

    /// Sketch to check (verify only).
    #[arg(long)]
    pub sketch: Option<PathBuf>,
}

impl CliConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        CliConfig {
            input: input.into(),
            output: None,
            epsilon: None,
            relative: false,
            s_override: None,
            frob_sq: None,
            seed: 0,
            trials: 100,
            report_format: ReportFormat::Json,
            sketch: None,
        }
    }

    pub fn epsilon_mode(&self) -> EpsilonMode {
        if self.relative {
            EpsilonMode::Relative
        } else {
            EpsilonMode::Absolute
        }
    }

    fn epsilon(&self) -> CliResult<f64> {
        match self.epsilon {
            Some(e) => Ok(check_epsilon(e).map(|_| e)?),
            None => Err(CliError::usage("--epsilon is required")),
        }
    }

    fn output(&self) -> CliResult<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::usage("--output is required"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "spsketch", version, about = "Element-wise matrix sparsification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Threshold and sample an in-memory matrix.
    Sparsify(CliConfig),
    /// One-pass sampling straight from a coordinate file.
    Stream(CliConfig),
    /// Measure ||A - sketch|| against epsilon.
    Verify(CliConfig),
    /// Repeated seeded sparsification with error statistics.
    Experiment(CliConfig),
    /// Exact second moments of the per-draw deviation.
    Moments(CliConfig),
}

/// JSON sidecar written next to every sketch.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SketchSidecar {
    pub n: usize,
    pub s: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SparsifySummary {
    pub n: usize,
    pub s: u64,
    pub nnz: usize,
    pub threshold: f64,
    pub epsilon: f64,
    pub output: PathBuf,
    pub sidecar: PathBuf,
    /// Entries read from the input (stream mode).
    pub reads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config: CliConfig,
    pub n: usize,
    pub epsilon: f64,
    pub error: f64,
    pub converged: bool,
    pub passed: bool,
    /// Failure probability guaranteed at the default budget, `1/n`.
    pub theoretical_failure_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentsReport {
    pub config: CliConfig,
    pub thresholded: bool,
    pub agreement_ok: bool,
    pub bound_ok: bool,
    pub diagnostics: MomentDiagnostics,
}

/// Path of the JSON sidecar for a sketch file: `<output>.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sketch(
    output: &Path,
    sketch: &SparseSketch,
    epsilon: f64,
) -> CliResult<(PathBuf, SketchSidecar)> {
    write_coordinate_file(output, sketch.n, &sketch.triples)?;
    let sidecar = SketchSidecar {
        n: sketch.n,
        s: sketch.s,
        epsilon,
        seed: sketch.seed,
        threshold: threshold_for(sketch.n, epsilon),
    };
    let path = sidecar_path(output);
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &sidecar).map_err(SketchError::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok((path, sidecar))
}

pub fn cmd_sparsify(cfg: &CliConfig) -> CliResult<SparsifySummary> {
    let eps_in = cfg.epsilon()?;
    let output = cfg.output()?;
    let a = read_dense_file(&cfg.input)?;
    let n = a.n();

    let (sketch, epsilon) = match (cfg.relative, cfg.s_override) {
        (false, None) => (sparsify(&a, eps_in, cfg.seed)?, eps_in),
        (false, Some(s)) => (sparsify_with_samples(&a, eps_in, s, cfg.seed)?, eps_in),
        (true, None) => sparsify_relative_with_epsilon(
            &a,
            eps_in,
            cfg.seed,
            &PowerIterationConfig::for_dimension(n),
        )?,
        (true, Some(s)) => {
            if a.is_zero() {
                return Err(SketchError::ZeroMatrix("relative-error sparsification").into());
            }
            let norm = spectral_norm(&a, &PowerIterationConfig::for_dimension(n))?.value;
            let eps = eps_in * norm;
            (sparsify_with_samples(&a, eps, s, cfg.seed)?, eps)
        }
    };

    let (sidecar, meta) = write_sketch(output, &sketch, epsilon)?;
    Ok(SparsifySummary {
        n,
        s: sketch.s,
        nnz: sketch.nnz(),
        threshold: meta.threshold,
        epsilon,
        output: output.to_path_buf(),
        sidecar,
        reads: None,
    })
}

pub fn cmd_stream(cfg: &CliConfig) -> CliResult<SparsifySummary> {
    if cfg.relative {
        return Err(CliError::usage(
            "--relative needs ||A|| before sampling and cannot be used with stream",
        ));
    }
    let epsilon = cfg.epsilon()?;
    let output = cfg.output()?;
    let mut stream = EntryStream::open(&cfg.input)?;
    let n = stream.n();
    let s = match (cfg.s_override, cfg.frob_sq) {
        (Some(s), _) => s,
        (None, Some(f)) => sample_size(n, f, epsilon)?,
        (None, None) => {
            return Err(CliError::usage(
                "stream needs --samples or --frob-sq to fix the budget before the pass",
            ))
        }
    };
    let sketch = one_pass_sparsify(&mut stream, epsilon, s, cfg.seed)?;
    let reads = stream.reads();
    let (sidecar, meta) = write_sketch(output, &sketch, epsilon)?;
    Ok(SparsifySummary {
        n,
        s,
        nnz: sketch.nnz(),
        threshold: meta.threshold,
        epsilon,
        output: output.to_path_buf(),
        sidecar,
        reads: Some(reads),
    })
}

/// Returns the report; a failed check is reported as
/// [`ExitKind::VerificationFailed`] by [`run`].
pub fn cmd_verify(cfg: &CliConfig) -> CliResult<VerifyReport> {
    let eps_in = cfg.epsilon()?;
    let sketch_path = cfg
        .sketch
        .as_deref()
        .ok_or_else(|| CliError::usage("verify needs --sketch"))?;
    let a = read_dense_file(&cfg.input)?;
    let (n, triples) = read_triples_file(sketch_path)?;
    if n != a.n() {
        return Err(SketchError::DimensionMismatch {
            expected: a.n(),
            found: n,
        }
        .into());
    }
    let sketch = SparseSketch {
        n,
        s: triples.len() as u64,
        seed: cfg.seed,
        triples,
    };
    let power = PowerIterationConfig::for_dimension(n);
    let epsilon = if cfg.relative {
        eps_in * spectral_norm(&a, &power)?.value
    } else {
        eps_in
    };
    let diff = a.sub(&sketch.to_dense())?;
    let est = spectral_norm(&diff, &power)?;
    Ok(VerifyReport {
        config: cfg.clone(),
        n,
        epsilon,
        error: est.value,
        converged: est.converged,
        passed: est.value <= epsilon,
        theoretical_failure_bound: 1.0 / n as f64,
    })
}

pub fn cmd_experiment(cfg: &CliConfig) -> CliResult<analysis::ExperimentReport> {
    let eps_in = cfg.epsilon()?;
    if cfg.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let a = read_dense_file(&cfg.input)?;
    let mut opts = ExperimentOptions::new(a.n(), eps_in, cfg.trials, cfg.seed);
    if cfg.relative {
        if a.is_zero() {
            return Err(SketchError::ZeroMatrix("relative-error sparsification").into());
        }
        opts.epsilon = eps_in * spectral_norm(&a, &opts.power)?.value;
    }
    opts.samples = cfg.s_override;
    let report = analysis::run_experiment_with(&a, &opts)?;

    match &cfg.output {
        Some(path) => {
            let w = BufWriter::new(File::create(path)?);
            write_report(&report, cfg.report_format, w)?;
        }
        None => write_report(&report, cfg.report_format, std::io::stdout().lock())?,
    }
    Ok(report)
}

fn write_report<W: Write>(
    report: &analysis::ExperimentReport,
    format: ReportFormat,
    mut w: W,
) -> CliResult<()> {
    match format {
        ReportFormat::Json => {
            report.write_json(&mut w)?;
            writeln!(w)?;
        }
        ReportFormat::Csv => report.write_csv(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// Moments of `Â`; the input is thresholded first when `--epsilon` is given.
pub fn cmd_moments(cfg: &CliConfig) -> CliResult<MomentsReport> {
    let a = read_dense_file(&cfg.input)?;
    if a.n() > analysis::MAX_ENUMERATION_N {
        return Err(SketchError::TooLarge {
            n: a.n(),
            max: analysis::MAX_ENUMERATION_N,
        }
        .into());
    }
    let a_hat = match cfg.epsilon {
        Some(_) => crate::sparsifier::threshold_zero(&a, cfg.epsilon()?)?,
        None => a,
    };
    let diagnostics = analysis::exact_second_moment(&a_hat)?;
    let report = MomentsReport {
        config: cfg.clone(),
        thresholded: cfg.epsilon.is_some(),
        agreement_ok: diagnostics.agrees(1e-12),
        bound_ok: diagnostics.within_variance_bound(1e-9),
        diagnostics,
    };
    if let Some(path) = &cfg.output {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &report).map_err(SketchError::from)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(report)
}

/// Runs a parsed command and prints its summary to stdout.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Sparsify(cfg) => {
            let s = cmd_sparsify(cfg)?;
            println!(
                "n = {}, s = {}, nnz = {}, threshold = {}",
                s.n, s.s, s.nnz, s.threshold
            );
        }
        Command::Stream(cfg) => {
            let s = cmd_stream(cfg)?;
            println!(
                "n = {}, s = {}, nnz = {}, threshold = {}, reads = {}",
                s.n,
                s.s,
                s.nnz,
                s.threshold,
                s.reads.unwrap_or(0)
            );
        }
        Command::Verify(cfg) => {
            let r = cmd_verify(cfg)?;
            print_json(&r);
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            println!("{verdict}: ||A - sketch|| = {} vs eps = {}", r.error, r.epsilon);
            if !r.passed {
                return Err(CliError::verification(format!(
                    "error {} exceeds eps {}",
                    r.error, r.epsilon
                )));
            }
        }
        Command::Experiment(cfg) => {
            let r = cmd_experiment(cfg)?;
            eprintln!(
                "trials = {}, s = {}, failure rate = {} (bound {}), bernstein tail = {:e}",
                r.trials,
                r.s,
                r.empirical_failure_rate,
                r.theoretical_failure_bound,
                r.bernstein_tail_bound
            );
        }
        Command::Moments(cfg) => {
            let r = cmd_moments(cfg)?;
            if cfg.output.is_none() {
                print_json(&r);
            }
            println!(
                "agreement: {}, variance bound: {}",
                if r.agreement_ok { "OK" } else { "MISMATCH" },
                if r.bound_ok { "OK" } else { "VIOLATED" }
            );
        }
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("failed to serialize report: {e}"),
    }
}
