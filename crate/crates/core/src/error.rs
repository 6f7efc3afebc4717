use thiserror::Error;

/// Errors raised by estimators, tests and the drivers built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid configuration (grids, partitions, schemes, flags).
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or insufficient input data.
    #[error("data error: {0}")]
    Data(String),
    /// A kernel estimate could not be formed, e.g. zero kernel mass.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// An optimizer or root finder failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
