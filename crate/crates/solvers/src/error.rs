use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed problem: {0}")]
    Malformed(String),

    #[error("problem is infeasible (phase-one residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("problem is unbounded in the direction of variable {variable}")]
    Unbounded { variable: usize },

    #[error("iteration limit of {limit} reached (gap {gap:.3e}, residual {residual:.3e})")]
    IterationLimit { limit: usize, gap: f64, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, SolverError>;
