use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// `Contract` covers precondition violations (shape mismatches, out-of-range
/// arguments); the remaining variants are input-dependent failures that a
/// caller may want to tell apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("checkpoint truncated: expected at least {expected} bytes, found {found}")]
    CheckpointTruncated { expected: usize, found: usize },

    #[error("checkpoint has bad magic bytes")]
    CheckpointMagic,

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { expected: u32, found: u32 },

    #[error("checkpoint CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CheckpointCrc { stored: u32, computed: u32 },

    #[error("checkpoint shape header: {0}")]
    CheckpointShape(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
