use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed {format} header: {reason}")]
    MalformedHeader {
        format: &'static str,
        reason: String,
    },

    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unsupported variant: {0}")]
    Unsupported(String),

    #[error("{format} requires {expected} channel(s), image has {found}")]
    ChannelMismatch {
        format: &'static str,
        expected: u8,
        found: u8,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("bit-plane index {0} out of range 0..=7")]
    InvalidPlane(u8),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),

    #[error("unrecognized container signature")]
    UnrecognizedContainer,

    #[error("invalid container: {0}")]
    InvalidContainer(String),

    #[error("no trailer footer found: {0}")]
    MissingTrailer(String),

    #[error("no frame found (wrong key, wrong k, or no message)")]
    NoFrame,

    #[error("corrupt frame: {0}")]
    CorruptFrame(String),

    #[error("message of {len} bytes exceeds capacity of {capacity} bytes")]
    MessageTooLong { len: usize, capacity: usize },

    #[error("cover too small: {bits} slot bits cannot hold the 7-byte frame header")]
    ZeroCapacity { bits: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures that mean "nothing hidden here under these parameters",
    /// as opposed to I/O or format problems.
    pub fn is_no_frame(&self) -> bool {
        matches!(
            self,
            Error::NoFrame | Error::CorruptFrame(_) | Error::MissingTrailer(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
