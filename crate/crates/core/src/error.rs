use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("quadrature budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("kernel is not a positive good kernel: {0}")]
    NotPositiveKernel(String),

    #[error("non-hermitian input: imaginary part {0:e} of an expectation value")]
    NonHermitian(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
