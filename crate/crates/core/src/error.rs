use alloc::string::String;

/// Errors raised by the modelling and estimation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("requested {requested} paths but only {available} distinct delay-Doppler cells exist")]
    TooManyPaths { requested: usize, available: usize },
    #[error("invalid frame layout: {0}")]
    Layout(String),
    #[error("matrix of order {0} is too large to materialise densely")]
    TooLarge(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no block survived support detection")]
    EmptySupport,
    #[error("threshold estimator needs a single pilot, frame has {0}")]
    MultiPilot(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: &str) -> Error {
    Error::Domain(String::from(msg))
}
