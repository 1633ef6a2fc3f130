use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("unknown {what} version {found}")]
    UnknownVersion { what: &'static str, found: u8 },

    /// A weight file whose trailing digest does not match its content, or a
    /// container produced with a different weight store.
    #[error("digest mismatch: expected {expected:016x}, found {found:016x}")]
    DigestMismatch { expected: u64, found: u64 },

    #[error("crc mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: u32, alphabet: usize },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
