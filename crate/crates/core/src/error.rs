use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the structurization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("bad magic bytes: expected \"SPCV\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("missing metadata file {0}")]
    MissingMetadata(PathBuf),

    #[error("non-finite value during {context} at step {step}")]
    NonFinite { context: String, step: usize },

    #[error("tape has already been consumed by a backward pass")]
    TapeConsumed,

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attach a frame index to a stage error.
    pub fn in_frame(self, frame: usize) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
