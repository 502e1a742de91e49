//! Parallel decompression of a re-encoded worksheet entry.
//!
//! [`repack_entry`] recompresses one entry with a full flush every
//! `interval` uncompressed bytes. A full flush byte-aligns the output and
//! empties the history window, so inflation can start at any recorded
//! boundary while the entry stays one ordinary Deflate stream. The
//! boundary offsets live in a JSON sidecar next to the archive.
//!
//! [`parse_parallel_decompress`] then gives each worker an equally spaced
//! run of boundaries. A worker inflates and parses its segment in turns,
//! one element at a time, and finishes the cell straddling its segment end
//! by inflating on into the next segment.

use std::fs;
use std::io::{self, Seek, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use flate2::{Compress, Compression, FlushCompress, Status};
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, ArchiveError, Method};
use crate::bench::zipwrite::{EntryMethod, ZipWriter};
use crate::error::{Error, Result};
use crate::frame::{ColumnFrame, FrameBuilder, FrameWriter};
use crate::job::{join, SheetJob, SheetPass};
use crate::metadata::probe_head;
use crate::options::Phases;
use crate::scan::{CellSink, Feed, ScanError, SheetScanner};

pub const INDEX_VERSION: u32 = 1;
pub const DEFAULT_BOUNDARY_INTERVAL: u64 = 1 << 20;
pub const SIDECAR_EXTENSION: &str = "sridx";

/// Reset points of a repacked entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryIndex {
    pub version: u32,
    pub entry: String,
    pub uncompressed_size: u64,
    /// `[compressed_offset, uncompressed_offset]` pairs; compressed offsets
    /// count from the start of the entry payload.
    pub boundaries: Vec<(u64, u64)>,
}

impl BoundaryIndex {
    /// Checks the index against the entry it claims to describe.
    pub fn validate(&self, a: &Archive) -> Result<()> {
        let mismatch = |reason: String| Error::IndexMismatch {
            entry: self.entry.clone(),
            reason,
        };
        if self.version != INDEX_VERSION {
            return Err(mismatch(format!("unsupported index version {}", self.version)));
        }
        let e = a
            .entry(&self.entry)
            .ok_or_else(|| mismatch("entry not in archive".into()))?;
        if e.method != Method::Deflate {
            return Err(mismatch("entry is not deflated".into()));
        }
        if e.uncompressed_size != self.uncompressed_size {
            return Err(mismatch(format!(
                "index covers {} bytes, entry holds {}",
                self.uncompressed_size, e.uncompressed_size
            )));
        }
        if self.boundaries.first() != Some(&(0, 0)) {
            return Err(mismatch("first boundary must be (0, 0)".into()));
        }
        for w in self.boundaries.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(mismatch("boundaries are not strictly increasing".into()));
            }
        }
        let &(c, u) = self.boundaries.last().expect("non-empty");
        if c >= e.compressed_size.max(1) || u > e.uncompressed_size {
            return Err(mismatch("boundary beyond the end of the entry".into()));
        }
        Ok(())
    }

    /// Start offsets (compressed, uncompressed) of `threads` segments spread
    /// evenly over the boundaries; fewer when boundaries run out.
    pub fn segments(&self, threads: usize) -> Vec<(u64, u64)> {
        let b = self.boundaries.len();
        let t = threads.clamp(1, b.max(1));
        let mut out: Vec<(u64, u64)> = (0..t).map(|i| self.boundaries[i * b / t]).collect();
        out.dedup();
        out
    }
}

/// `<archive>.sridx`
pub fn sidecar_path(archive: impl AsRef<Path>) -> PathBuf {
    let mut s = archive.as_ref().as_os_str().to_owned();
    s.push(".");
    s.push(SIDECAR_EXTENSION);
    PathBuf::from(s)
}

pub fn write_index(path: impl AsRef<Path>, index: &BoundaryIndex) -> Result<()> {
    let json = serde_json::to_vec_pretty(index).map_err(io::Error::other)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn read_index(path: impl AsRef<Path>) -> Result<BoundaryIndex> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
}

/// Copies `a` to `out`, recompressing entry `name` with a history reset
/// every `interval` uncompressed bytes.
pub fn repack_entry<W: Write + Seek>(a: &Archive, name: &str, interval: u64, level: u32, out: W) -> Result<(W, BoundaryIndex)> {
    if interval == 0 {
        return Err(Error::InvalidOptions("boundary interval must be positive".into()));
    }
    let target = a
        .entry(name)
        .ok_or_else(|| ArchiveError::NoSuchEntry(name.to_string()))?
        .name
        .clone();
    let mut zip = ZipWriter::new(out);
    let mut index = None;
    for e in a.entries() {
        if e.name == target {
            index = Some(recompress(a, e.name.as_str(), interval, level, &mut zip)?);
            continue;
        }
        match e.method {
            Method::Deflate => {
                let raw = a.read_raw(&e.name)?;
                let mut w = zip.start_raw_entry(&e.name, true, e.crc32, e.uncompressed_size)?;
                w.write_all(&raw)?;
                w.finish()?;
            }
            Method::Stored => {
                let body = a.read_entry_full(&e.name)?;
                let mut w = zip.start_entry(&e.name, EntryMethod::Stored)?;
                w.write_all(&body)?;
                w.finish()?;
            }
        }
    }
    let out = zip.finish()?;
    Ok((out, index.expect("target entry visited")))
}

fn recompress<W: Write + Seek>(a: &Archive, name: &str, interval: u64, level: u32, zip: &mut ZipWriter<W>) -> Result<BoundaryIndex> {
    let e = a.entry(name).expect("entry exists");
    let (crc, size) = (e.crc32, e.uncompressed_size);
    let mut w = zip.start_raw_entry(name, true, crc, size)?;
    let mut c = Compress::new(Compression::new(level), false);
    let mut stream = a.open_entry_stream(name)?;
    let mut input = vec![0u8; interval.min(1 << 20).max(1) as usize];
    let mut output = Vec::with_capacity(input.len() + 1024);
    let mut boundaries = vec![(0u64, 0u64)];
    let mut since = 0u64;
    while !stream.is_finished() {
        let want = ((interval - since) as usize).min(input.len());
        let (n, finished) = stream.next_chunk(&mut input[..want])?;
        since += n as u64;
        let flush = if finished {
            FlushCompress::Finish
        } else if since == interval {
            FlushCompress::Full
        } else {
            FlushCompress::None
        };
        deflate(&mut c, &input[..n], flush, &mut output, &mut w)?;
        if flush == FlushCompress::Full {
            boundaries.push((c.total_out(), c.total_in()));
            since = 0;
        }
    }
    if size == 0 {
        deflate(&mut c, &[], FlushCompress::Finish, &mut output, &mut w)?;
    }
    w.finish()?;
    Ok(BoundaryIndex {
        version: INDEX_VERSION,
        entry: name.to_string(),
        uncompressed_size: size,
        boundaries,
    })
}

fn deflate(c: &mut Compress, mut input: &[u8], flush: FlushCompress, buf: &mut Vec<u8>, out: &mut impl Write) -> io::Result<()> {
    loop {
        buf.clear();
        let before = c.total_in();
        let status = c.compress_vec(input, buf, flush).map_err(io::Error::other)?;
        input = &input[(c.total_in() - before) as usize..];
        out.write_all(buf)?;
        let full = buf.len() == buf.capacity();
        match status {
            Status::StreamEnd => return Ok(()),
            _ if input.is_empty() && !full && flush != FlushCompress::Finish => return Ok(()),
            _ => {}
        }
    }
}

/// Work done by one segment worker.
#[derive(Clone, Copy, Debug, Default)]
struct SegmentStats {
    cells: u64,
    inflate: Duration,
}

/// Parses the cells owned by the segment `[start.1, end)`: from its first
/// anchor up to the end of the cell open at `end`.
fn parse_segment<S: CellSink>(
    a: &Archive,
    name: &str,
    start: (u64, u64),
    end: u64,
    element_size: usize,
    sink: &mut S,
) -> Result<SegmentStats> {
    let mut stream = a.open_entry_stream_at(name, start.0, start.1)?;
    let mut scanner = if start.1 == 0 {
        SheetScanner::new()
    } else {
        SheetScanner::seeking()
    };
    let mut buf = vec![0u8; element_size.max(1)];
    let mut at = start.1;
    let mut stats = SegmentStats::default();
    while !stream.is_finished() {
        let t = Instant::now();
        let (n, _) = stream.next_chunk(&mut buf)?;
        stats.inflate += t.elapsed();
        let limit = end.saturating_sub(at).min(n as u64) as usize;
        at += n as u64;
        if let Feed::Stopped(_) = scanner.feed(&buf[..n], limit, sink)? {
            stats.cells = scanner.stats().cells;
            return Ok(stats);
        }
    }
    scanner.finish()?;
    stats.cells = scanner.stats().cells;
    Ok(stats)
}

fn parse_segments(job: &SheetJob<'_>, index: &BoundaryIndex, threads: usize, builder: &FrameBuilder) -> Result<Duration> {
    let a = job.archive;
    let starts = index.segments(threads);
    let element_size = job.options.ring_element_size;
    let stats = std::thread::scope(|s| {
        let workers: Vec<_> = starts
            .iter()
            .enumerate()
            .map(|(i, &start)| {
                let end = starts.get(i + 1).map_or(index.uncompressed_size, |b| b.1);
                s.spawn(move || {
                    let mut w: FrameWriter<'_> = builder.writer();
                    parse_segment(a, &index.entry, start, end, element_size, &mut w).map_err(|e| match e {
                        Error::Archive(ArchiveError::Inflate { reason, .. }) if start.1 > 0 => Error::IndexMismatch {
                            entry: index.entry.clone(),
                            reason: format!("inflate from boundary {start:?} failed: {reason}"),
                        },
                        e => e,
                    })
                })
            })
            .collect();
        workers.into_iter().map(join).collect::<Result<Vec<_>>>()
    })?;
    Ok(stats.iter().map(|s| s.inflate).sum())
}

/// Loads a sheet from an entry repacked by [`repack_entry`], using up to
/// `options.threads` independent workers.
pub fn parse_parallel_decompress(job: &SheetJob<'_>, index: &BoundaryIndex) -> Result<(ColumnFrame, Phases)> {
    job.options.validate()?;
    let path = &job.sheet.path;
    let entry = job
        .archive
        .entry(path)
        .ok_or_else(|| ArchiveError::NoSuchEntry(path.clone()))?;
    if !entry.name.eq_ignore_ascii_case(&index.entry) {
        return Err(Error::IndexMismatch {
            entry: index.entry.clone(),
            reason: format!("sheet lives in {}", entry.name),
        });
    }
    index.validate(job.archive)?;
    let head = probe_head(job.archive, path)?;
    let mut threads = if head.cells_have_refs == Some(false) {
        1
    } else {
        job.options.threads
    };
    let (rows, cols) = head.dimension.map_or((0, 0), |d| (d.rows, d.cols));
    job.run(|frame_options| {
        let t = Instant::now();
        loop {
            let builder = FrameBuilder::new(rows, cols, frame_options.clone())?;
            match parse_segments(job, index, threads, &builder) {
                Ok(decompress) => {
                    return Ok(SheetPass {
                        builder,
                        decompress,
                        parse: t.elapsed(),
                    })
                }
                Err(Error::Scan(ScanError::LocationRequired { .. })) if threads > 1 => threads = 1,
                Err(e) => return Err(e),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use std::io::{Cursor, Read};

    use super::*;

    fn archive_with(body: &[u8]) -> Archive {
        let mut w = ZipWriter::new(Cursor::new(Vec::new()));
        let mut e = w.start_entry("a.txt", EntryMethod::Stored).unwrap();
        e.write_all(b"kept as is").unwrap();
        e.finish().unwrap();
        let mut e = w.start_entry("sheet.xml", EntryMethod::Deflate).unwrap();
        e.write_all(body).unwrap();
        e.finish().unwrap();
        Archive::from_bytes(w.finish().unwrap().into_inner()).unwrap()
    }

    fn body(len: usize) -> Vec<u8> {
        // Repetitive enough that back-references would cross any boundary.
        (0..len).map(|i| b"<c r=\"A1\"><v>12.5</v></c>"[i % 25] ^ ((i / 7919) as u8 & 1)).collect()
    }

    fn repack(a: &Archive, interval: u64) -> (Archive, BoundaryIndex) {
        let (out, index) = repack_entry(a, "sheet.xml", interval, 6, Cursor::new(Vec::new())).unwrap();
        (Archive::from_bytes(out.into_inner()).unwrap(), index)
    }

    #[test]
    fn repacked_stream_inflates_to_the_original() {
        let data = body(300_000);
        let (b, index) = repack(&archive_with(&data), 40_000);
        assert_eq!(b.read_entry_full("sheet.xml").unwrap(), data);
        assert_eq!(b.read_entry_full("a.txt").unwrap(), b"kept as is");
        // Independent inflater over the raw payload.
        let raw = b.read_raw("sheet.xml").unwrap();
        let mut out = Vec::new();
        flate2::read::DeflateDecoder::new(&raw[..]).read_to_end(&mut out).unwrap();
        assert_eq!(out, data);
        assert_eq!(index.boundaries.len(), 8);
        assert!(index.boundaries.iter().skip(1).all(|b| b.1 % 40_000 == 0));
        index.validate(&b).unwrap();
    }

    #[test]
    fn every_segment_inflates_without_history() {
        let data = body(200_000);
        let (b, index) = repack(&archive_with(&data), 30_000);
        let raw = b.read_raw("sheet.xml").unwrap();
        for &(c, u) in &index.boundaries {
            let out = miniz_oxide::inflate::decompress_to_vec(&raw[c as usize..]).unwrap();
            assert_eq!(out, &data[u as usize..], "boundary ({c}, {u})");
        }
    }

    #[test]
    fn interval_covering_the_entry_gives_one_segment() {
        let data = body(5000);
        let (_, index) = repack(&archive_with(&data), 5000);
        assert_eq!(index.boundaries, [(0, 0)]);
        let (_, index) = repack(&archive_with(&data), 1 << 20);
        assert_eq!(index.boundaries, [(0, 0)]);
    }

    #[test]
    fn segments_spread_evenly() {
        let index = BoundaryIndex {
            version: 1,
            entry: "x".into(),
            uncompressed_size: 100,
            boundaries: (0..8).map(|i| (i * 3, i * 10)).collect(),
        };
        assert_eq!(index.segments(4), [(0, 0), (6, 20), (12, 40), (18, 60)]);
        assert_eq!(index.segments(1), [(0, 0)]);
        assert_eq!(index.segments(20).len(), 8);
    }

    #[test]
    fn stale_index_is_rejected() {
        let data = body(100_000);
        let (b, mut index) = repack(&archive_with(&data), 30_000);
        index.uncompressed_size += 1;
        assert!(matches!(index.validate(&b), Err(Error::IndexMismatch { .. })));
        index.uncompressed_size -= 1;
        index.boundaries.swap(1, 2);
        assert!(matches!(index.validate(&b), Err(Error::IndexMismatch { .. })));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("book.xlsx");
        assert_eq!(sidecar_path(&p), dir.path().join("book.xlsx.sridx"));
        let index = BoundaryIndex {
            version: 1,
            entry: "xl/worksheets/sheet1.xml".into(),
            uncompressed_size: 9,
            boundaries: vec![(0, 0), (4, 5)],
        };
        write_index(sidecar_path(&p), &index).unwrap();
        let text = fs::read_to_string(sidecar_path(&p)).unwrap();
        assert!(text.contains("\"boundaries\""));
        assert_eq!(read_index(sidecar_path(&p)).unwrap(), index);
    }
}
