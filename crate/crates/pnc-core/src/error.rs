use thiserror::Error;

/// Errors surfaced by the library's fallible operations.
#[derive(Debug, Error, PartialEq)]
pub enum PncError {
    #[error("QPSK requires an even number of bits, got {0}")]
    OddBitCount(usize),

    #[error("packet length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sample index {index} out of range for frame with {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("sample {0} is absent (synchronous frame has no offset-segment samples)")]
    AbsentSample(usize),

    #[error("operation requires an inner table, got an edge or absent table")]
    EdgeTableRejected,

    #[error("channel parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("graph shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, PncError>;
