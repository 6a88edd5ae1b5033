use alloc::string::String;

/// Errors produced by the compute modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box: {field} must be positive and finite (got {value})")]
    InvalidBBox { field: &'static str, value: f64 },
    #[error("coordinate out of range: {0}")]
    OutOfRange(String),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
