use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary data outside the interior of the hull: {0}")]
    OutsideHull(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("non-conforming partition: {0}")]
    NonConforming(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
