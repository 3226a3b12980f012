use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency {0} lies outside [-pi, pi]")]
    FrequencyOutOfRange(f64),

    #[error("spectral density has a pole at lambda = 0 (d = {0})")]
    PoleAtZero(f64),

    #[error("matrix is not positive definite: innovation variance {value:e} at index {index}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("autocovariance tolerance {requested:e} not met (achieved {achieved:e})")]
    AutocovTolerance { requested: f64, achieved: f64 },

    #[error("order {n} exceeds the exact-trace cap of {cap}; use a stochastic trace mode")]
    ExactTraceCap { n: usize, cap: usize },

    #[error("circulant embedding failed: most negative eigenvalue {min_eigenvalue:e} at size {size}")]
    EmbeddingFailed { size: usize, min_eigenvalue: f64 },

    #[error("series length {n} exceeds the dense fallback cap of {cap}")]
    TooLargeForFallback { n: usize, cap: usize },

    #[error("no posterior draws")]
    EmptySamples,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
