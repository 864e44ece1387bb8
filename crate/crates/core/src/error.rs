use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("basis cache needs {requested} bytes, over the {cap} byte budget")]
    MemoryBudget { requested: u128, cap: u128 },

    #[error("{0} split is empty")]
    EmptySplit(&'static str),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    CorruptMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("file truncated: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("label {label} at row {row} is out of range for {n_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("head kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("missing series: {0}")]
    MissingSeries(String),

    #[error("run {config} failed: {source}")]
    RunFailed {
        config: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the content of an input file.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::CorruptMagic { .. }
                | Error::UnsupportedVersion(_)
                | Error::Truncated { .. }
                | Error::ChecksumMismatch { .. }
                | Error::LabelOutOfRange { .. }
                | Error::Malformed(_)
                | Error::KindMismatch { .. }
        )
    }
}
