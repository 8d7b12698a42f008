use thiserror::Error;

/// Errors raised across the moment toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inadmissible state: {0}")]
    Inadmissible(String),

    #[error("derivative of order {requested} requested, model supports up to {available}")]
    UnsupportedOrder { requested: usize, available: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver failure at t = {time:.6e}{}: {reason}", cell.map(|c| format!(", cell {c}")).unwrap_or_default())]
    Solver {
        time: f64,
        cell: Option<usize>,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
