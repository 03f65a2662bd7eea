//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tensor, circuit, training and data operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes, leg lists or dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A network or circuit specification is structurally invalid
    /// (disconnected graph, dangling bond, duplicate leg, bad wire).
    #[error("invalid structure: {0}")]
    Structure(String),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data admits no meaningful answer (e.g. constant pixels,
    /// a class with no events, an all-zero Born vector).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A linear solve or eigendecomposition failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A serialized artifact is malformed. `offset` is the byte
    /// position at which decoding failed, when known.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A checkpoint or dataset carries an unsupported version tag.
    #[error("unsupported version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
