//! Error type shared by every stage of the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlimmerError>;

#[derive(Debug, Error)]
pub enum GlimmerError {
    /// CSV header or overall document layout is wrong.
    #[error("format error: {0}")]
    Format(String),

    /// A single CSV row could not be mapped to a record.
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("line {line}: timestamp does not increase ({message})")]
    Ordering { line: u64, message: String },

    /// Input outside the domain of a numeric operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite value produced by a forward or backward pass.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training hit a non-finite value and was aborted.
    #[error("numeric error in epoch {epoch}: {message}")]
    Numeric { epoch: usize, message: String },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    /// An operation was called on an object in the wrong state.
    #[error("state error: {0}")]
    State(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GlimmerError {
    pub fn domain(msg: impl Into<String>) -> Self {
        GlimmerError::Domain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        GlimmerError::Shape(msg.into())
    }
}
