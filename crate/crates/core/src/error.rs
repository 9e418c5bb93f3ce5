use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid fading model: {0}")]
    InvalidModel(String),
    #[error("duplicate index {0} in covariance index set")]
    DuplicateIndex(i64),
    #[error("invalid pilot pattern: {0}")]
    InvalidPattern(String),
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("error variance {0} outside [0, 1]")]
    VarianceOutOfRange(f64),
    #[error("power must be non-negative, got {0}")]
    NegativePower(f64),
    #[error("invalid input distribution: {0}")]
    InvalidInput(String),
    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),
    #[error("query (P = {p}, v = {v}) outside the tabulated range")]
    OutOfGrid { p: f64, v: f64 },
    #[error("grid noise variance {grid} does not match requested {requested}")]
    NoiseMismatch { grid: f64, requested: f64 },
    #[error("invalid search options: {0}")]
    InvalidSearch(String),
    #[error("enumeration of {0} points exceeds the limit")]
    EnumerationTooLarge(u128),
    #[error("invalid verification request: {0}")]
    InvalidVerification(String),
    #[error("linear system is not positive definite")]
    NotPositiveDefinite,
    #[error("grid parse error at line {line}: {msg}")]
    GridParse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
