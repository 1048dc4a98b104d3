use thiserror::Error;

/// Raised when tensor shapes do not line up.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("shape mismatch: {0}")]
pub struct ShapeError(pub String);

impl ShapeError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}
