use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure in {context} (residual {residual:.3e})")]
    Numerical { context: String, residual: f64 },

    #[error("enumeration budget exceeded: {needed} elementary solves required, budget is {budget}")]
    Budget { needed: f64, budget: f64 },

    #[error("unsupported feature: {0}")]
    Unsupported(String),

    #[error("solver returned unaccepted status {0}")]
    Status(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
