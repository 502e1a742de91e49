use std::io;

use thiserror::Error;

use crate::archive::ArchiveError;
use crate::scan::ScanError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for workbook loading.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("archive has no `_rels/.rels` part")]
    MissingRels,
    #[error("malformed relationships part {part}: {reason}")]
    MalformedRels { part: String, reason: String },
    #[error("malformed workbook: {0}")]
    MalformedWorkbook(String),
    #[error("no sheet matches `{0}`")]
    NoSuchSheet(String),
    #[error("shared string index {index} out of range (table holds {count} strings)")]
    DanglingStringIndex { index: u32, count: usize },
    #[error(
        "worksheet needs {needed} bytes in memory but only {available} are available; \
         retry with interleaved mode"
    )]
    OutOfMemory { needed: u64, available: u64 },
    #[error("boundary index does not match entry {entry}: {reason}")]
    IndexMismatch { entry: String, reason: String },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("worker thread panicked")]
    WorkerPanicked,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// True when the failure stems from an allocation that cannot be satisfied;
    /// the interleaved engine is the usual remedy.
    pub fn is_out_of_memory(&self) -> bool {
        matches!(self, Error::OutOfMemory { .. })
    }
}
