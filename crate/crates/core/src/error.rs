use thiserror::Error;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("invalid accuracy parameter: {0}")]
    InvalidAccuracy(f64),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("failure probability must lie in (0, 1], got {0}")]
    InvalidDelta(f64),

    #[error("matrix must be square with n >= 1 (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("expected {expected} entries, got {found}")]
    WrongLength { expected: usize, found: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected n = {expected}, found n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix not thresholded at eps/(2n): entry ({row}, {col}) = {value} <= {threshold}")]
    NotThresholded {
        row: usize,
        col: usize,
        value: f64,
        threshold: f64,
    },

    #[error("stable rank undefined for the zero matrix")]
    StableRankUndefined,

    #[error("{0} requires a non-zero matrix")]
    ZeroMatrix(&'static str),

    #[error("matrix too large for enumeration: n = {n} exceeds {max}")]
    TooLarge { n: usize, max: usize },

    #[error("index ({row}, {col}) out of range for n = {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("duplicate stream entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("invalid power-iteration config: {0}")]
    InvalidConfig(String),

    #[error("matrix market parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SketchError>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SketchError::NonPositive { name, value })
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && !epsilon.is_nan() {
        Ok(())
    } else {
        Err(SketchError::InvalidAccuracy(epsilon))
    }
}
