use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Solver outcomes that carry a partial iterate live in [`crate::sdp::SolveError`]
/// instead, since they are results rather than misuse.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("relaxation capacity exceeded: {0}")]
    Capacity(String),

    #[error("monomial outside the moment index set: {0}")]
    OutOfBasis(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
