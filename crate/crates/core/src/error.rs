use thiserror::Error;

/// Errors produced by domain construction, form assembly and the verifiers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain has no interior nodes")]
    EmptyInterior,

    #[error("invalid boundary measure: {0}")]
    InvalidMeasure(String),

    #[error("form is not symmetric: {0}")]
    AsymmetricForm(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("time must be nonnegative, got {0}")]
    InvalidTime(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
