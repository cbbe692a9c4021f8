//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by callers that map errors to process exit
/// codes: bad arguments are distinguished from bad data or I/O failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Caller passed an invalid argument or configuration.
    Usage,
    /// Input data was unreadable, malformed, or inconsistent.
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {byte_offset}")]
    InvalidUtf8 { path: PathBuf, byte_offset: u64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("malformed model: {0}")]
    ModelFormat(String),

    #[error("malformed table cache: {0}")]
    CacheFormat(String),

    #[error("token id {id} at position {index} is out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange {
        id: u32,
        index: usize,
        vocab_size: u32,
    },

    #[error("fingerprint mismatch: log was produced by tokenizer {log_fingerprint}, model is {model_fingerprint}")]
    FingerprintMismatch {
        log_fingerprint: String,
        model_fingerprint: String,
    },

    #[error("malformed loss log at {locus}: {reason}")]
    LossLog { locus: String, reason: String },

    #[error("alignment failure in document {doc_id} at token index {index}: {reason}")]
    Alignment {
        doc_id: u64,
        index: usize,
        reason: String,
    },

    #[error("token id {token_id} has zero probability under the fitted model")]
    ZeroProbability { token_id: u32 },

    #[error("embedding row {row} has zero norm and no direction")]
    ZeroNormRow { row: usize },

    #[error("simulation diverged at step {step}: row norm exceeded {limit}")]
    Diverged { step: u64, limit: f64 },
}

impl Error {
    #[must_use]
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) => ErrorCategory::Usage,
            _ => ErrorCategory::Data,
        }
    }
}
