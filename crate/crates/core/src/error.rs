use classicality_solvers::SolverError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A matrix or measurement failed a structural check (shape, Hermiticity,
    /// completeness, index range).
    #[error("{0}")]
    Structural(String),

    #[error("operator has eigenvalue {eigenvalue:.3e} below the clamping tolerance")]
    Negativity { eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("{count} deterministic strategies exceed the enumeration limit of {limit}")]
    StrategyOverflow { count: u128, limit: u128 },

    #[error("solver failure: {0}")]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
