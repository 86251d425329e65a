use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} bath coordinates, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("decay operator is not Hermitian (max |G - G^dag| = {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("states {alpha} and {beta} are degenerate (gap {gap:e})")]
    DegeneratePair { alpha: usize, beta: usize, gap: f64 },

    #[error("analytic spectrum requires jx == jy (got jx = {jx}, jy = {jy})")]
    AnalyticUnavailable { jx: f64, jy: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("snapshot members disagree on time ({0} vs {1})")]
    TimeMismatch(f64, f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("missing file: {0}")]
    MissingFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
