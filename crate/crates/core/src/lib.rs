//! Parallel, memory-frugal loading of XLSX worksheets into a columnar frame.
//!
//! Three engines share one resumable scanner: [`consecutive`] inflates the
//! whole worksheet and parses equal chunks in parallel, [`interleaved`]
//! streams it through a fixed ring consumed by staggered parsers, and
//! [`pardeflate`] decompresses independent segments of a re-encoded entry.

pub mod archive;
pub mod bench;
pub mod cli;
pub mod consecutive;
pub mod error;
pub mod frame;
pub mod interleaved;
pub mod job;
pub mod metadata;
pub mod options;
pub mod pardeflate;
pub mod scan;
pub mod sst;
pub mod sysmem;
pub mod workbook;

pub use error::{Error, Result};
pub use frame::{ColumnFrame, Transformer};
pub use metadata::SheetSelector;
pub use options::{EngineOptions, Mode, Phases, StringsMode};
pub use workbook::{read_sheet, Workbook};
