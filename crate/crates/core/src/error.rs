use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function being evaluated.
    #[error("{what} = {value} is outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} out of range (valid: 0..{len})")]
    Index { index: usize, len: usize },

    /// The residual (or Jacobian) produced a non-finite entry.
    #[error("non-finite value in residual row {row}")]
    NonFinite { row: usize },

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("linear system is singular at pivot {0}")]
    Singular(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
