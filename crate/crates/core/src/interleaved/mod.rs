//! Interleaved engine: one thread inflates the worksheet element by element
//! into a fixed ring while `K` parsers consume the elements in a staggered
//! order. Memory stays at the ring size whatever the document size.

pub mod model;
pub mod protocol;
pub mod ring;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::archive::EntryStream;
use crate::error::{Error, Result};
use crate::frame::{ColumnFrame, FrameBuilder};
use crate::job::{join, SheetJob, SheetPass};
use crate::metadata::probe_head;
use crate::options::Phases;
use crate::scan::{CellSink, Feed, ScanError, SheetScanner};

pub use protocol::{may_fill, Next, ParserCursor};
pub use ring::{Backoff, Ring};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PipelineStats {
    /// Cells emitted by all parsers together.
    pub cells: u64,
    /// Elements written by the producer.
    pub elements: u64,
    /// Uncompressed bytes streamed.
    pub bytes: u64,
    /// Time the producer spent inflating.
    pub decompress: Duration,
}

/// Runs the producer and `ring`'s parsers over `stream`. Each parser builds
/// its sink with `make(k)` and hands it to `collect` when done.
pub fn run_pipeline<S, T, M, C>(stream: EntryStream<'_>, ring: &Ring, make: M, collect: C) -> Result<(Vec<T>, PipelineStats)>
where
    S: CellSink,
    T: Send,
    M: Fn(usize) -> S + Sync,
    C: Fn(S) -> T + Sync,
{
    let parsers = ring.parsers();
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let fail = |e: Error| {
        let mut f = failure.lock().unwrap_or_else(|p| p.into_inner());
        f.get_or_insert(e);
        ring.poison();
    };
    let (outputs, produced) = std::thread::scope(|s| {
        let producer = s.spawn(|| produce(ring, stream).map_err(|e| fail(e)));
        let workers: Vec<_> = (0..parsers)
            .map(|k| {
                let (make, collect, fail) = (&make, &collect, &fail);
                s.spawn(move || {
                    let mut sink = make(k);
                    let cells = consume(ring, k, parsers, &mut sink);
                    // Whatever happens, never block the producer again.
                    ring.set_hold(k, u64::MAX);
                    match cells {
                        Ok(n) => Ok((collect(sink), n)),
                        Err(e) => {
                            fail(e);
                            Err(Error::WorkerPanicked)
                        }
                    }
                })
            })
            .collect();
        let outputs: Vec<_> = workers.into_iter().map(join).collect();
        let produced = producer.join().map_err(|_| Error::WorkerPanicked);
        (outputs, produced)
    });
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    let (elements, bytes, decompress) = match produced? {
        Ok(p) => p,
        Err(()) => return Err(Error::WorkerPanicked),
    };
    let mut stats = PipelineStats {
        elements,
        bytes,
        decompress,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(parsers);
    for o in outputs {
        let (t, n) = o?;
        stats.cells += n;
        out.push(t);
    }
    Ok((out, stats))
}

/// Producer loop: returns (elements, bytes, inflate time).
fn produce(ring: &Ring, mut stream: EntryStream<'_>) -> Result<(u64, u64, Duration)> {
    let mut busy = Duration::ZERO;
    let mut bytes = 0u64;
    let mut w = 0u64;
    let mut backoff = Backoff::default();
    while !stream.is_finished() {
        while !ring.may_fill(w) {
            if ring.is_poisoned() {
                return Ok((w, bytes, busy));
            }
            backoff.wait();
        }
        backoff.reset();
        let t = Instant::now();
        // SAFETY: `may_fill(w)` holds and `w` is not yet published.
        let (n, _) = stream.next_chunk(unsafe { ring.slab_mut(w) })?;
        busy += t.elapsed();
        ring.publish(w, n);
        bytes += n as u64;
        w += 1;
    }
    ring.finish();
    Ok((w, bytes, busy))
}

/// Parser loop for parser `k`; returns the number of cells it emitted.
fn consume<S: CellSink>(ring: &Ring, k: usize, parsers: usize, sink: &mut S) -> Result<u64> {
    let mut cursor = ParserCursor::new(k, parsers);
    let mut scanner = SheetScanner::new();
    let mut backoff = Backoff::default();
    loop {
        let done = ring.done();
        match cursor.next(ring.published(), done) {
            Next::Wait => {
                if ring.is_poisoned() {
                    return Ok(scanner.stats().cells);
                }
                sink.idle();
                backoff.wait();
            }
            Next::Read { index, owned, fresh } => {
                backoff.reset();
                if fresh {
                    scanner.reset(index != 0);
                }
                // SAFETY: `index` is published and equals our hold.
                let data = unsafe { ring.slab(index) };
                let limit = if owned { data.len() } else { 0 };
                let r = scanner.feed(data, limit, sink)?;
                cursor.advance(matches!(r, Feed::Stopped(_)));
                ring.set_hold(k, cursor.hold());
            }
            Next::Finish { extending } => {
                if extending {
                    scanner.finish()?;
                }
                return Ok(scanner.stats().cells);
            }
        }
    }
}

/// Loads a sheet with the interleaved engine.
pub fn parse_interleaved(job: &SheetJob<'_>) -> Result<(ColumnFrame, Phases)> {
    let o = job.options;
    o.validate()?;
    let path = &job.sheet.path;
    let head = probe_head(job.archive, path)?;
    // Without `r` attributes only a single parser knows where it is.
    let mut parsers = if head.cells_have_refs == Some(false) {
        1
    } else {
        o.parser_threads
    };
    let (rows, cols) = head.dimension.map_or((0, 0), |d| (d.rows, d.cols));
    job.run(|frame_options| {
        let t = Instant::now();
        loop {
            let builder = FrameBuilder::new(rows, cols, frame_options.clone())?;
            let ring = Ring::new(o.ring_elements, o.ring_element_size, parsers);
            let stream = job.archive.open_entry_stream(path)?;
            let r = run_pipeline(stream, &ring, |_| builder.writer(), drop);
            drop(ring);
            match r {
                Ok((_, stats)) => {
                    return Ok(SheetPass {
                        builder,
                        decompress: stats.decompress,
                        parse: t.elapsed(),
                    })
                }
                Err(Error::Scan(ScanError::LocationRequired { .. })) if parsers > 1 => parsers = 1,
                Err(e) => return Err(e),
            }
        }
    })
}
