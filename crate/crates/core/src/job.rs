//! What every engine does around its worksheet pass: date styles, the
//! shared-strings table (concurrently or afterwards) and finalization.

use std::time::{Duration, Instant};

use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::frame::{ColumnFrame, FrameBuilder, FrameOptions, SharedStrings};
use crate::metadata::{read_date_styles, SheetInfo, WorkbookMeta};
use crate::options::{EngineOptions, Phases, StringsMode};
use crate::sst::load_shared_strings;

/// One sheet to load.
#[derive(Clone, Copy)]
pub struct SheetJob<'a> {
    pub archive: &'a Archive,
    pub meta: &'a WorkbookMeta,
    pub sheet: &'a SheetInfo,
    pub options: &'a EngineOptions,
}

/// Result of an engine's worksheet pass.
pub(crate) struct SheetPass {
    pub builder: FrameBuilder,
    pub decompress: Duration,
    pub parse: Duration,
}

impl SheetJob<'_> {
    pub(crate) fn frame_options(&self) -> Result<FrameOptions> {
        let date_styles = match (&self.meta.styles_path, self.options.dates) {
            (Some(p), true) => Some(read_date_styles(self.archive, p)?),
            _ => None,
        };
        Ok(FrameOptions {
            headers: self.options.headers,
            date_styles,
        })
    }

    fn strings(&self) -> Result<(Option<SharedStrings>, Duration)> {
        let Some(path) = &self.meta.shared_strings_path else {
            return Ok((None, Duration::ZERO));
        };
        let t = Instant::now();
        let s = load_shared_strings(self.archive, path, self.options.ring_element_size)?;
        Ok((Some(s), t.elapsed()))
    }

    /// Runs `pass` and the strings loader according to the strings mode,
    /// then finalizes the frame.
    pub(crate) fn run<F>(&self, pass: F) -> Result<(ColumnFrame, Phases)>
    where
        F: FnOnce(FrameOptions) -> Result<SheetPass> + Send,
    {
        let start = Instant::now();
        let frame_options = self.frame_options()?;
        let (sheet, (strings, strings_time)) = match self.options.strings {
            StringsMode::Parallel if self.meta.shared_strings_path.is_some() => {
                std::thread::scope(|s| {
                    let loader = s.spawn(|| self.strings());
                    let sheet = pass(frame_options);
                    let strings = loader.join().map_err(|_| Error::WorkerPanicked)?;
                    Ok::<_, Error>((sheet?, strings?))
                })?
            }
            _ => {
                let sheet = pass(frame_options)?;
                (sheet, self.strings()?)
            }
        };
        let t = Instant::now();
        let frame = sheet.builder.finish(strings.as_ref())?;
        let phases = Phases {
            decompress: sheet.decompress,
            parse: sheet.parse,
            strings: strings_time,
            transform: t.elapsed(),
            total: start.elapsed(),
        };
        Ok((frame, phases))
    }
}

/// Joins a scoped worker, turning a panic into an error.
pub(crate) fn join<T>(h: std::thread::ScopedJoinHandle<'_, Result<T>>) -> Result<T> {
    h.join().map_err(|_| Error::WorkerPanicked)?
}
