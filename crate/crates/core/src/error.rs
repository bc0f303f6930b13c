use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the matrix kernel, the distribution types and the fitter.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {constraint}")]
    Validation { constraint: String },

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("function is not evaluable at eigenvalue {eigenvalue}")]
    MatFunDomain { eigenvalue: Complex64 },

    #[error("conditioning on an event of probability {probability:e} is degenerate")]
    DegenerateConditioning { probability: f64 },

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("integration failed: {message} (achieved error estimate {achieved:e})")]
    Integration { message: String, achieved: f64 },

    #[error("series did not converge after {terms} terms (last term magnitude {last_term:e})")]
    NonConvergence { terms: usize, last_term: f64 },

    #[error("moment is infinite: {0}")]
    Divergent(String),

    #[error("state {state} has zero expected sojourn time")]
    DegenerateState { state: usize },

    #[error("shift too large: transformed data nonpositive at indices {indices:?}")]
    ShiftTooLarge { indices: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
