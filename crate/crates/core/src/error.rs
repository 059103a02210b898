use thiserror::Error;

/// Errors raised by the estimators, risk engines and simulation drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("column {column} is constant and cannot be standardized")]
    DegenerateColumn { column: usize },

    #[error("matrix has numerical rank zero")]
    RankZero,

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("limiting risk diverges at gamma = {gamma}")]
    Singularity { gamma: f64 },

    #[error("infeasible configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
