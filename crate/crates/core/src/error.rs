use thiserror::Error;

/// Errors raised by the numerical kernel and the probability layers above it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QprobError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("eigenvalue {eigenvalue:e} outside the function domain [{lo}, {hi}]")]
    Domain { eigenvalue: f64, lo: f64, hi: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -{threshold:e}")]
    NotPsd { min_eigenvalue: f64, threshold: f64 },

    #[error("{what} did not converge: {detail}")]
    Convergence { what: &'static str, detail: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("index error: {0}")]
    Index(String),
}

pub type Result<T> = std::result::Result<T, QprobError>;
