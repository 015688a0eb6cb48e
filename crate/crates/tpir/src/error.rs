use thiserror::Error;

/// Errors shared by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero in GF({q})")]
    DivisionByZero { q: u64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("field too small: need q >= {needed}, got q = {q}")]
    FieldTooSmall { q: u64, needed: u64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("randomness space too large for exhaustive enumeration ({size} states)")]
    TooLargeForExhaustive { size: u128 },
    #[error("retrieval failed: {0}")]
    RetrievalFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
