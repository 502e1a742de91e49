//! Consecutive engine: inflate the whole worksheet, split it into equal
//! chunks and parse them in parallel.
//!
//! Each chunk parser starts at the first structural tag of its chunk and
//! finishes the cell it holds at the chunk end by reading into the next
//! chunk, so every cell is emitted by the chunk holding its opening `<`.
//! Sheets whose cells lack `r` attributes are parsed positionally after a
//! reduced prescan that counts rows and cells up to each chunk's anchor.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use crate::archive::ArchiveError;
use crate::error::{Error, Result};
use crate::frame::{FrameBuilder, FrameOptions};
use crate::job::{join, SheetJob, SheetPass};
use crate::metadata::{first_cell_has_ref, probe_dimension};
use crate::scan::{prescan_positions, tail_extent, CellSink, ChunkPosition, Feed, ScanError, SheetScanner};
use crate::sysmem::available_memory;

/// Contiguous chunk bounds covering a document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkPlan {
    pub bounds: Vec<Range<usize>>,
}

impl ChunkPlan {
    pub fn starts(&self) -> Vec<usize> {
        self.bounds.iter().map(|b| b.start).collect()
    }
}

/// `threads` chunks whose sizes differ by at most one byte; surplus chunks
/// of tiny documents are empty.
pub fn split_chunks(doc_len: usize, threads: usize) -> ChunkPlan {
    let threads = threads.max(1);
    let base = doc_len / threads;
    let extra = doc_len % threads;
    let mut start = 0;
    let bounds = (0..threads)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    ChunkPlan { bounds }
}

/// Parses the cells owned by `bounds`: from the chunk's first anchor to the
/// end of the cell open at the chunk end. Returns the number of cells emitted.
pub fn parse_chunk<S: CellSink>(doc: &[u8], bounds: Range<usize>, sink: &mut S) -> Result<u64, ScanError> {
    if bounds.is_empty() {
        return Ok(0);
    }
    let mut scanner = if bounds.start == 0 {
        SheetScanner::new()
    } else {
        SheetScanner::seeking()
    };
    run(&mut scanner, &doc[bounds.start..], bounds.len(), sink)
}

/// Like [`parse_chunk`] for documents without `r` attributes, starting from
/// a prescanned position.
pub fn parse_chunk_at<S: CellSink>(
    doc: &[u8],
    bounds: Range<usize>,
    position: Option<ChunkPosition>,
    sink: &mut S,
) -> Result<u64, ScanError> {
    if bounds.is_empty() {
        return Ok(0);
    }
    if bounds.start == 0 {
        return parse_chunk(doc, bounds, sink);
    }
    let Some(p) = position.filter(|p| p.offset < bounds.end) else {
        return Ok(0);
    };
    let mut scanner = SheetScanner::at_anchor(p.kind, p.row, p.col);
    run(&mut scanner, &doc[p.offset..], bounds.end - p.offset, sink)
}

fn run<S: CellSink>(scanner: &mut SheetScanner, window: &[u8], limit: usize, sink: &mut S) -> Result<u64, ScanError> {
    if scanner.feed(window, limit, sink)? == Feed::Consumed {
        scanner.finish()?;
    }
    Ok(scanner.stats().cells)
}

/// Loads a sheet with the consecutive engine.
pub fn parse_consecutive(job: &SheetJob<'_>) -> Result<(crate::frame::ColumnFrame, crate::options::Phases)> {
    job.options.validate()?;
    job.run(|frame_options| sheet_pass(job, frame_options))
}

fn sheet_pass(job: &SheetJob<'_>, frame_options: FrameOptions) -> Result<SheetPass> {
    let a = job.archive;
    let path = &job.sheet.path;
    let entry = a.entry(path).ok_or_else(|| ArchiveError::NoSuchEntry(path.clone()))?;
    let dimension = probe_dimension(a, path)?;

    let mut needed = entry.compressed_size + entry.uncompressed_size;
    if let Some(d) = dimension {
        needed += FrameBuilder::footprint(d.rows, d.cols);
    }
    if let Some(available) = job.options.memory_budget.or_else(available_memory) {
        if needed > available {
            return Err(Error::OutOfMemory { needed, available });
        }
    }

    let t = Instant::now();
    let doc = a.read_entry_full(path).map_err(|e| match e {
        ArchiveError::Alloc { needed } => Error::OutOfMemory { needed, available: 0 },
        e => e.into(),
    })?;
    let decompress = t.elapsed();

    let t = Instant::now();
    let threads = job.options.threads;
    let plan = split_chunks(doc.len(), threads);
    let positional = threads > 1 && first_cell_has_ref(&doc) == Some(false);
    let extent = dimension.map(|d| (d.rows, d.cols));
    let builder = if positional {
        parse_positional(&doc, &plan, extent, &frame_options)?
    } else {
        let (rows, cols) = extent.or_else(|| tail_extent(&doc)).unwrap_or((0, 0));
        let builder = FrameBuilder::new(rows, cols, frame_options.clone())?;
        match parse_chunks(&doc, &plan, &builder, |doc, _, b, sink| parse_chunk(doc, b.clone(), sink)) {
            Err(Error::Scan(ScanError::LocationRequired { .. })) => {
                drop(builder);
                parse_positional(&doc, &plan, extent, &frame_options)?
            }
            r => r.map(|_| builder)?,
        }
    };
    drop(doc);
    Ok(SheetPass {
        builder,
        decompress,
        parse: t.elapsed(),
    })
}

fn parse_positional(
    doc: &[u8],
    plan: &ChunkPlan,
    extent: Option<(u32, u32)>,
    frame_options: &FrameOptions,
) -> Result<FrameBuilder> {
    if plan.bounds.len() == 1 {
        let builder = FrameBuilder::new(extent.map_or(0, |e| e.0), extent.map_or(0, |e| e.1), frame_options.clone())?;
        parse_chunks(doc, plan, &builder, |doc, _, b, sink| parse_chunk(doc, b.clone(), sink))?;
        return Ok(builder);
    }
    let prescan = prescan_positions(doc, &plan.starts())?;
    let (rows, cols) = extent.unwrap_or((prescan.rows, prescan.cols));
    let builder = FrameBuilder::new(rows, cols, frame_options.clone())?;
    let positions = &prescan.positions;
    parse_chunks(doc, plan, &builder, |doc, i, b, sink| {
        parse_chunk_at(doc, b.clone(), positions[i], sink)
    })?;
    Ok(builder)
}

/// Runs one worker per chunk; returns the total number of cells emitted.
fn parse_chunks<F>(doc: &[u8], plan: &ChunkPlan, builder: &FrameBuilder, parse: F) -> Result<u64>
where
    F: Fn(&[u8], usize, &Range<usize>, &mut crate::frame::FrameWriter<'_>) -> Result<u64, ScanError> + Sync,
{
    let cells = AtomicU64::new(0);
    std::thread::scope(|s| {
        let workers: Vec<_> = plan
            .bounds
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty())
            .map(|(i, b)| {
                let (parse, cells) = (&parse, &cells);
                s.spawn(move || {
                    let mut writer = builder.writer();
                    let n = parse(doc, i, b, &mut writer)?;
                    cells.fetch_add(n, Ordering::Relaxed);
                    Ok(())
                })
            })
            .collect();
        workers.into_iter().try_for_each(join)
    })?;
    Ok(cells.into_inner())
}
