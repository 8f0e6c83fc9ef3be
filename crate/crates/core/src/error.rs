use thiserror::Error;

/// Errors produced by the GP engine and the relevance estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (jitter ladder exhausted at {max_jitter:e})")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("degenerate inputs: {0}")]
    DegenerateInputs(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("unsupported Gauss-Hermite order {0} (must be in 1..=100)")]
    UnsupportedOrder(usize),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("negative variance {0} beyond clamping tolerance")]
    NegativeVariance(f64),

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("need at least 2 resamples, got {0}")]
    InsufficientResamples(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Data(e.to_string())
    }
}
