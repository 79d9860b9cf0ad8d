use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("label {label} out of range for n = {n}")]
    LabelOutOfRange { label: usize, n: usize },
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("unreachable precision: {0}")]
    Unreachable(String),
    #[error("dimension cap exceeded: {dim} > {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("wrong oracle kind: expected {0}")]
    WrongKind(&'static str),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("uncertified polynomial: {0}")]
    Uncertified(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range(msg: impl Into<String>) -> Error {
    Error::OutOfRange(msg.into())
}
