use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsawError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("invalid walk: {0}")]
    InvalidWalk(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("walk is not a half-space walk")]
    NotHalfSpace,
    #[error("plaquettes are not pairwise disjoint")]
    NotDisjoint,
    #[error("no consistent preimage: {0}")]
    NoPreimage(String),
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, AsawError>;
