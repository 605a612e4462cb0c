//! Crate error type.

use thiserror::Error;

/// Errors produced by pool ingestion, selection, simulation, evaluation, and
/// providers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A JSONL line failed to parse. Line numbers are 1-based.
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    /// A record violated a pool invariant. Line numbers are 1-based; line 0
    /// means the record did not come from a file.
    #[error("{message} at line {line}")]
    InvalidRecord { line: usize, message: String },

    #[error("duplicate id \"{id}\" at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("not an ESEL file")]
    BadMagic,

    #[error("unsupported format version {0}")]
    VersionMismatch(u32),

    #[error("truncated payload")]
    TruncatedPayload,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Caller violated an operation precondition (dimension mismatch,
    /// zero-norm vector, empty input, out-of-range argument).
    #[error("{0}")]
    Contract(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("no fixture for prompt")]
    NoFixture,
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
