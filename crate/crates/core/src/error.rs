use std::io;

use thiserror::Error;

/// Errors surfaced by trace I/O, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad trace magic {0:?}, expected \"ATRC\"")]
    BadMagic([u8; 4]),
    #[error("unsupported trace version {0}, expected 1")]
    BadVersion(u32),
    #[error("trace header declares {expected} records but the file holds {available} bytes of record data")]
    TruncatedFile { expected: u64, available: u64 },
    #[error("unknown record kind byte {0:#04x}")]
    UnknownKind(u8),
    #[error("invalid stride: stride must be non-zero")]
    InvalidStride,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("static combination {0} is missing from the run results")]
    MissingCombination(usize),
    #[error("no baseline row for trace `{0}`")]
    MissingBaseline(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
