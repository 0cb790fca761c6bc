//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimonError>;

#[derive(Debug, Error)]
pub enum SimonError {
    /// Two tensors (or a tensor and an expected contract) disagree on shape.
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// Input too small or empty for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A scalar argument is outside its legal range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Configuration that can never produce a valid model or run.
    #[error("configuration error: {0}")]
    Config(String),

    /// Data that violates a documented contract (e.g. non-binary targets).
    #[error("data error: {0}")]
    Data(String),

    /// API misuse: the call sequence or argument pairing is wrong.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file is not in the expected container format.
    #[error("format error: {0}")]
    Format(String),

    /// A file is in the right format but its payload is damaged.
    #[error("corrupt file: {0}")]
    Corruption(String),

    #[error("transport error after {retries} retries: {message}")]
    Transport { retries: u32, message: String },
}
