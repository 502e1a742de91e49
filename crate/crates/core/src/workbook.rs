//! Entry point tying the container, metadata and engines together.

use std::path::Path;

use crate::archive::Archive;
use crate::consecutive::parse_consecutive;
use crate::error::{Error, Result};
use crate::frame::ColumnFrame;
use crate::interleaved::parse_interleaved;
use crate::metadata::{probe_dimension, probe_sst_count, read_metadata, SheetDimension, SheetSelector, WorkbookMeta};
use crate::options::{EngineOptions, Mode, Phases};
use crate::pardeflate::{parse_parallel_decompress, read_index, sidecar_path, BoundaryIndex};
use crate::job::SheetJob;

/// An opened XLSX file.
pub struct Workbook {
    archive: Archive,
    meta: WorkbookMeta,
    index: Option<BoundaryIndex>,
}

impl Workbook {
    /// Opens `path` and, when present, its boundary-index sidecar.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Workbook::open_with(path, false)
    }

    /// Like [`Workbook::open`], optionally checking CRCs of every part read.
    pub fn open_with(path: impl AsRef<Path>, verify: bool) -> Result<Self> {
        let path = path.as_ref();
        let mut wb = Workbook::from_archive(Archive::open(path)?.with_verify(verify))?;
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            wb.index = Some(read_index(sidecar)?);
        }
        Ok(wb)
    }

    pub fn from_archive(archive: Archive) -> Result<Self> {
        let meta = read_metadata(&archive)?;
        Ok(Workbook {
            archive,
            meta,
            index: None,
        })
    }

    pub fn with_index(mut self, index: BoundaryIndex) -> Self {
        self.index = Some(index);
        self
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn meta(&self) -> &WorkbookMeta {
        &self.meta
    }

    pub fn index(&self) -> Option<&BoundaryIndex> {
        self.index.as_ref()
    }

    pub fn sheet_names(&self) -> impl Iterator<Item = &str> {
        self.meta.sheets.iter().map(|s| s.name.as_str())
    }

    /// Declared extent of a sheet, if it has a dimension element.
    pub fn dimension(&self, sheet: &SheetSelector) -> Result<Option<SheetDimension>> {
        let info = self.meta.select(sheet)?;
        probe_dimension(&self.archive, &info.path)
    }

    /// Unique-string count announced by the shared-strings part.
    pub fn shared_strings_count(&self) -> Result<Option<u32>> {
        match &self.meta.shared_strings_path {
            Some(p) => probe_sst_count(&self.archive, p),
            None => Ok(None),
        }
    }

    pub fn read(&self, sheet: &SheetSelector, mode: Mode, options: &EngineOptions) -> Result<ColumnFrame> {
        self.read_timed(sheet, mode, options).map(|(f, _)| f)
    }

    /// Loads a sheet and reports how long each stage took.
    pub fn read_timed(&self, sheet: &SheetSelector, mode: Mode, options: &EngineOptions) -> Result<(ColumnFrame, Phases)> {
        let info = self.meta.select(sheet)?;
        let job = SheetJob {
            archive: &self.archive,
            meta: &self.meta,
            sheet: info,
            options,
        };
        match mode {
            Mode::Consecutive => parse_consecutive(&job),
            Mode::Interleaved => parse_interleaved(&job),
            Mode::ParallelDeflate => {
                let index = self.index.as_ref().ok_or_else(|| {
                    Error::InvalidOptions("parallel-deflate mode needs a boundary index; repack the file first".into())
                })?;
                parse_parallel_decompress(&job, index)
            }
        }
    }
}

/// Opens `path` and loads one sheet.
pub fn read_sheet(path: impl AsRef<Path>, sheet: impl Into<SheetSelector>, mode: Mode, options: &EngineOptions) -> Result<ColumnFrame> {
    Workbook::open(path)?.read(&sheet.into(), mode, options)
}
