//! ZIP/OPC container access.
//!
//! Only what an XLSX reader needs: the central directory (with ZIP64 records
//! when present), stored and Deflate entries, a full-buffer inflate path and
//! a fixed-step streaming path. Sizes always come from the central directory,
//! so entries written with data descriptors need no local-header scanning.
//!
//! All reads are positioned (`read_at`), which keeps [`Archive`] immutable and
//! shareable across threads; each [`EntryStream`] owns its own cursor.

use std::collections::HashMap;
use std::fs::File;
use std::io;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use flate2::{Decompress, FlushDecompress, Status};
use thiserror::Error;

const SIG_EOCD: u32 = 0x0605_4b50;
const SIG_EOCD64: u32 = 0x0606_4b50;
const SIG_EOCD64_LOCATOR: u32 = 0x0706_4b50;
const SIG_CENTRAL: u32 = 0x0201_4b50;
const SIG_LOCAL: u32 = 0x0403_4b50;

const EOCD_LEN: usize = 22;
const EOCD64_LOCATOR_LEN: usize = 20;
const CENTRAL_LEN: usize = 46;
const LOCAL_LEN: usize = 30;
/// Maximum comment length plus the fixed record.
const EOCD_SEARCH: u64 = EOCD_LEN as u64 + u16::MAX as u64;

/// Compressed bytes pulled from the source per refill of a stream.
const STREAM_INPUT_BUFFER: usize = 64 * 1024;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum ArchiveError {
    #[error("not a ZIP archive (no end-of-central-directory record)")]
    NotAZip,
    #[error("entry {name} uses unsupported compression method {method}")]
    UnsupportedCompression { name: String, method: u16 },
    #[error("corrupt central directory: {0}")]
    CorruptDirectory(String),
    #[error("no entry named {0}")]
    NoSuchEntry(String),
    #[error("inflate failed for {name}: {reason}")]
    Inflate { name: String, reason: String },
    #[error("entry {name} inflated to {actual} bytes, directory declares {expected}")]
    SizeMismatch { name: String, expected: u64, actual: u64 },
    #[error("entry {name} failed CRC check (declared {expected:08x}, computed {actual:08x})")]
    CrcMismatch { name: String, expected: u32, actual: u32 },
    #[error("stream already finished")]
    StreamExhausted,
    #[error("cannot allocate {needed} bytes")]
    Alloc { needed: u64 },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Stored,
    Deflate,
}

/// One central-directory record.
#[derive(Debug)]
pub struct ArchiveEntry {
    pub name: String,
    pub method: Method,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    pub crc32: u32,
    pub local_header_offset: u64,
    payload_offset: OnceLock<u64>,
}

impl Clone for ArchiveEntry {
    fn clone(&self) -> Self {
        let payload_offset = OnceLock::new();
        if let Some(&off) = self.payload_offset.get() {
            let _ = payload_offset.set(off);
        }
        ArchiveEntry {
            name: self.name.clone(),
            method: self.method,
            compressed_size: self.compressed_size,
            uncompressed_size: self.uncompressed_size,
            crc32: self.crc32,
            local_header_offset: self.local_header_offset,
            payload_offset,
        }
    }
}

/// Readable byte sequence backing an archive.
#[derive(Debug)]
pub enum Source {
    Memory(Arc<[u8]>),
    File { file: File, len: u64 },
}

impl Source {
    pub fn len(&self) -> u64 {
        match self {
            Source::Memory(bytes) => bytes.len() as u64,
            Source::File { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn read_exact_at(&self, offset: u64, buf: &mut [u8]) -> io::Result<()> {
        let end = offset
            .checked_add(buf.len() as u64)
            .filter(|&end| end <= self.len())
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "read past end of archive"))?;
        match self {
            Source::Memory(bytes) => {
                buf.copy_from_slice(&bytes[offset as usize..end as usize]);
                Ok(())
            }
            Source::File { file, .. } => read_file_at(file, offset, buf),
        }
    }
}

#[cfg(unix)]
fn read_file_at(file: &File, offset: u64, buf: &mut [u8]) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_file_at(file: &File, mut offset: u64, mut buf: &mut [u8]) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset) {
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// A parsed ZIP central directory over an immutable source.
#[derive(Debug)]
pub struct Archive {
    source: Source,
    entries: Vec<ArchiveEntry>,
    index: HashMap<String, usize>,
    verify: bool,
}

impl Archive {
    pub fn open(path: impl AsRef<Path>) -> Result<Archive, ArchiveError> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        Archive::from_source(Source::File { file, len })
    }

    pub fn from_bytes(bytes: impl Into<Arc<[u8]>>) -> Result<Archive, ArchiveError> {
        Archive::from_source(Source::Memory(bytes.into()))
    }

    pub fn from_source(source: Source) -> Result<Archive, ArchiveError> {
        let entries = read_central_directory(&source)?;
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if index.insert(entry.name.clone(), i).is_some() {
                return Err(ArchiveError::CorruptDirectory(format!(
                    "duplicate entry {}",
                    entry.name
                )));
            }
        }
        Ok(Archive {
            source,
            entries,
            index,
            verify: false,
        })
    }

    /// Enables CRC-32 checks on full reads and completed streams.
    pub fn with_verify(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }

    pub fn verify(&self) -> bool {
        self.verify
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    /// Looks up an entry; OPC part names compare case-insensitively, so an
    /// exact miss falls back to an ASCII case-insensitive scan.
    pub fn entry(&self, name: &str) -> Option<&ArchiveEntry> {
        let name = name.strip_prefix('/').unwrap_or(name);
        if let Some(&i) = self.index.get(name) {
            return Some(&self.entries[i]);
        }
        self.entries
            .iter()
            .find(|e| e.name.eq_ignore_ascii_case(name))
    }

    fn require(&self, name: &str) -> Result<&ArchiveEntry, ArchiveError> {
        self.entry(name)
            .ok_or_else(|| ArchiveError::NoSuchEntry(name.to_string()))
    }

    /// Absolute offset of the entry's compressed payload, from its local header.
    pub fn payload_offset(&self, entry: &ArchiveEntry) -> Result<u64, ArchiveError> {
        if let Some(&off) = entry.payload_offset.get() {
            return Ok(off);
        }
        let mut header = [0u8; LOCAL_LEN];
        self.source
            .read_exact_at(entry.local_header_offset, &mut header)
            .map_err(|_| corrupt(format!("local header of {} out of bounds", entry.name)))?;
        if le_u32(&header, 0) != SIG_LOCAL {
            return Err(corrupt(format!("bad local header signature for {}", entry.name)));
        }
        let name_len = le_u16(&header, 26) as u64;
        let extra_len = le_u16(&header, 28) as u64;
        let off = entry.local_header_offset + LOCAL_LEN as u64 + name_len + extra_len;
        if off + entry.compressed_size > self.source.len() {
            return Err(corrupt(format!("payload of {} exceeds archive", entry.name)));
        }
        let _ = entry.payload_offset.set(off);
        Ok(off)
    }

    /// Reads the raw (still compressed) payload bytes of an entry.
    pub fn read_raw(&self, name: &str) -> Result<Vec<u8>, ArchiveError> {
        let entry = self.require(name)?;
        let off = self.payload_offset(entry)?;
        let mut buf = try_alloc(entry.compressed_size)?;
        self.source.read_exact_at(off, &mut buf)?;
        Ok(buf)
    }

    /// Inflates a whole entry into one buffer of exactly `uncompressed_size` bytes.
    ///
    /// Uses libdeflate, which is tuned for full-buffer decompression. The
    /// compressed payload is released before returning.
    pub fn read_entry_full(&self, name: &str) -> Result<Vec<u8>, ArchiveError> {
        let entry = self.require(name)?;
        let raw = self.read_raw(name)?;
        let out = match entry.method {
            Method::Stored => raw,
            Method::Deflate => {
                let mut out = try_alloc(entry.uncompressed_size)?;
                let mut inflater = libdeflater::Decompressor::new();
                let n = inflater.deflate_decompress(&raw, &mut out).map_err(|e| match e {
                    libdeflater::DecompressionError::InsufficientSpace => ArchiveError::SizeMismatch {
                        name: entry.name.clone(),
                        expected: entry.uncompressed_size,
                        actual: entry.uncompressed_size + 1,
                    },
                    libdeflater::DecompressionError::BadData => ArchiveError::Inflate {
                        name: entry.name.clone(),
                        reason: "malformed deflate stream".into(),
                    },
                })?;
                if n as u64 != entry.uncompressed_size {
                    return Err(ArchiveError::SizeMismatch {
                        name: entry.name.clone(),
                        expected: entry.uncompressed_size,
                        actual: n as u64,
                    });
                }
                out
            }
        };
        if self.verify {
            check_crc(entry, crc32fast::hash(&out))?;
        }
        Ok(out)
    }

    /// Opens a fixed-step stream at offset 0 of the entry's content.
    pub fn open_entry_stream(&self, name: &str) -> Result<EntryStream<'_>, ArchiveError> {
        let entry = self.require(name)?;
        self.stream_at(entry, 0, 0)
    }

    /// Opens a stream starting at a point of the Deflate stream where no
    /// back-reference crosses (a boundary reset). `compressed_offset` is
    /// relative to the payload start.
    pub fn open_entry_stream_at(
        &self,
        name: &str,
        compressed_offset: u64,
        uncompressed_offset: u64,
    ) -> Result<EntryStream<'_>, ArchiveError> {
        let entry = self.require(name)?;
        if compressed_offset > entry.compressed_size || uncompressed_offset > entry.uncompressed_size {
            return Err(corrupt(format!("stream start beyond the end of {}", entry.name)));
        }
        self.stream_at(entry, compressed_offset, uncompressed_offset)
    }

    fn stream_at<'a>(
        &'a self,
        entry: &'a ArchiveEntry,
        compressed_offset: u64,
        uncompressed_offset: u64,
    ) -> Result<EntryStream<'a>, ArchiveError> {
        let payload = self.payload_offset(entry)?;
        let inflater = match entry.method {
            Method::Stored => None,
            Method::Deflate => Some(Decompress::new(false)),
        };
        let compressed_offset = match entry.method {
            Method::Stored => uncompressed_offset,
            Method::Deflate => compressed_offset,
        };
        Ok(EntryStream {
            archive: self,
            entry,
            payload,
            compressed_pos: compressed_offset,
            input: if inflater.is_some() {
                vec![0; STREAM_INPUT_BUFFER]
            } else {
                Vec::new()
            },
            input_start: 0,
            input_end: 0,
            inflater,
            produced: uncompressed_offset,
            finished: uncompressed_offset == entry.uncompressed_size,
            // A stream that does not start at 0 cannot check the whole-entry CRC.
            crc: (self.verify && uncompressed_offset == 0).then(crc32fast::Hasher::new),
        })
    }
}

/// Streaming decompression over one entry, filling fixed-capacity elements.
pub struct EntryStream<'a> {
    archive: &'a Archive,
    entry: &'a ArchiveEntry,
    payload: u64,
    compressed_pos: u64,
    input: Vec<u8>,
    input_start: usize,
    input_end: usize,
    inflater: Option<Decompress>,
    produced: u64,
    finished: bool,
    crc: Option<crc32fast::Hasher>,
}

impl EntryStream<'_> {
    pub fn entry(&self) -> &ArchiveEntry {
        self.entry
    }

    pub fn produced(&self) -> u64 {
        self.produced
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Fills `dest` with the next `min(dest.len(), remaining)` bytes.
    ///
    /// Every call except the last writes exactly `dest.len()` bytes. The
    /// returned flag is true once the whole entry has been emitted.
    pub fn next_chunk(&mut self, dest: &mut [u8]) -> Result<(usize, bool), ArchiveError> {
        if self.finished {
            return Err(ArchiveError::StreamExhausted);
        }
        let remaining = self.entry.uncompressed_size - self.produced;
        let want = (dest.len() as u64).min(remaining) as usize;
        let dest = &mut dest[..want];
        let written = match self.inflater {
            None => {
                self.archive
                    .source
                    .read_exact_at(self.payload + self.compressed_pos, dest)?;
                self.compressed_pos += want as u64;
                want
            }
            Some(_) => self.inflate_into(dest)?,
        };
        self.produced += written as u64;
        if let Some(crc) = &mut self.crc {
            crc.update(&dest[..written]);
        }
        if self.produced == self.entry.uncompressed_size {
            self.finished = true;
            if let Some(crc) = self.crc.take() {
                check_crc(self.entry, crc.finalize())?;
            }
        }
        Ok((written, self.finished))
    }

    fn inflate_into(&mut self, dest: &mut [u8]) -> Result<usize, ArchiveError> {
        let mut written = 0;
        while written < dest.len() {
            let left = self.entry.compressed_size - self.compressed_pos;
            // With the input exhausted the inflater may still hold output.
            if self.input_start == self.input_end && left > 0 {
                let n = (self.input.len() as u64).min(left) as usize;
                self.archive
                    .source
                    .read_exact_at(self.payload + self.compressed_pos, &mut self.input[..n])?;
                self.compressed_pos += n as u64;
                self.input_start = 0;
                self.input_end = n;
            }
            let inflater = self.inflater.as_mut().expect("deflate stream");
            let in_before = inflater.total_in();
            let out_before = inflater.total_out();
            let status = inflater
                .decompress(
                    &self.input[self.input_start..self.input_end],
                    &mut dest[written..],
                    FlushDecompress::None,
                )
                .map_err(|e| ArchiveError::Inflate {
                    name: self.entry.name.clone(),
                    reason: e.to_string(),
                })?;
            let consumed = (inflater.total_in() - in_before) as usize;
            let emitted = (inflater.total_out() - out_before) as usize;
            self.input_start += consumed;
            written += emitted;
            match status {
                Status::StreamEnd if written < dest.len() => {
                    return Err(ArchiveError::SizeMismatch {
                        name: self.entry.name.clone(),
                        expected: self.entry.uncompressed_size,
                        actual: self.produced + written as u64,
                    });
                }
                Status::Ok | Status::BufError if consumed == 0 && emitted == 0 => {
                    let reason = if self.input_start == self.input_end {
                        "compressed data ended early"
                    } else {
                        "inflater made no progress"
                    };
                    return Err(self.inflate_error(reason));
                }
                Status::StreamEnd | Status::Ok | Status::BufError => {}
            }
        }
        Ok(written)
    }

    fn inflate_error(&self, reason: &str) -> ArchiveError {
        ArchiveError::Inflate {
            name: self.entry.name.clone(),
            reason: reason.to_string(),
        }
    }
}

fn check_crc(entry: &ArchiveEntry, actual: u32) -> Result<(), ArchiveError> {
    if actual != entry.crc32 {
        return Err(ArchiveError::CrcMismatch {
            name: entry.name.clone(),
            expected: entry.crc32,
            actual,
        });
    }
    Ok(())
}

fn try_alloc(len: u64) -> Result<Vec<u8>, ArchiveError> {
    let len_usize = usize::try_from(len).map_err(|_| ArchiveError::Alloc { needed: len })?;
    let mut buf = Vec::new();
    buf.try_reserve_exact(len_usize)
        .map_err(|_| ArchiveError::Alloc { needed: len })?;
    buf.resize(len_usize, 0);
    Ok(buf)
}

fn corrupt(msg: String) -> ArchiveError {
    ArchiveError::CorruptDirectory(msg)
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

struct Directory {
    entries: u64,
    size: u64,
    offset: u64,
}

fn locate_directory(source: &Source) -> Result<Directory, ArchiveError> {
    let len = source.len();
    if len < EOCD_LEN as u64 {
        return Err(ArchiveError::NotAZip);
    }
    let window = EOCD_SEARCH.min(len);
    let start = len - window;
    let mut tail = vec![0u8; window as usize];
    source.read_exact_at(start, &mut tail)?;
    let eocd_pos = (0..=tail.len() - EOCD_LEN)
        .rev()
        .find(|&i| le_u32(&tail, i) == SIG_EOCD)
        .ok_or(ArchiveError::NotAZip)?;
    let eocd = &tail[eocd_pos..];
    let mut dir = Directory {
        entries: le_u16(eocd, 10) as u64,
        size: le_u32(eocd, 12) as u64,
        offset: le_u32(eocd, 16) as u64,
    };

    let eocd_abs = start + eocd_pos as u64;
    if eocd_abs >= EOCD64_LOCATOR_LEN as u64 {
        let mut locator = [0u8; EOCD64_LOCATOR_LEN];
        source.read_exact_at(eocd_abs - EOCD64_LOCATOR_LEN as u64, &mut locator)?;
        if le_u32(&locator, 0) == SIG_EOCD64_LOCATOR {
            let eocd64_off = le_u64(&locator, 8);
            let mut rec = [0u8; 56];
            source
                .read_exact_at(eocd64_off, &mut rec)
                .map_err(|_| corrupt("zip64 end record out of bounds".into()))?;
            if le_u32(&rec, 0) != SIG_EOCD64 {
                return Err(corrupt("bad zip64 end record signature".into()));
            }
            dir = Directory {
                entries: le_u64(&rec, 32),
                size: le_u64(&rec, 40),
                offset: le_u64(&rec, 48),
            };
        }
    }
    if dir.offset.checked_add(dir.size).is_none_or(|end| end > len) {
        return Err(corrupt("central directory exceeds archive".into()));
    }
    Ok(dir)
}

fn read_central_directory(source: &Source) -> Result<Vec<ArchiveEntry>, ArchiveError> {
    let dir = locate_directory(source)?;
    let mut buf = vec![0u8; dir.size as usize];
    source.read_exact_at(dir.offset, &mut buf)?;
    let mut entries = Vec::with_capacity(dir.entries.min(1 << 16) as usize);
    let mut pos = 0usize;
    while pos + CENTRAL_LEN <= buf.len() && le_u32(&buf, pos) == SIG_CENTRAL {
        let rec = &buf[pos..];
        let method_raw = le_u16(rec, 10);
        let crc32 = le_u32(rec, 16);
        let mut compressed_size = le_u32(rec, 20) as u64;
        let mut uncompressed_size = le_u32(rec, 24) as u64;
        let name_len = le_u16(rec, 28) as usize;
        let extra_len = le_u16(rec, 30) as usize;
        let comment_len = le_u16(rec, 32) as usize;
        let mut local_header_offset = le_u32(rec, 42) as u64;
        let var_end = CENTRAL_LEN + name_len + extra_len + comment_len;
        if var_end > rec.len() {
            return Err(corrupt("truncated central directory record".into()));
        }
        let raw_name = &rec[CENTRAL_LEN..CENTRAL_LEN + name_len];
        let name = String::from_utf8_lossy(raw_name).replace('\\', "/");
        let name = name.trim_start_matches('/').to_string();

        // ZIP64 extended information: fields appear only for saturated values.
        let mut extra = &rec[CENTRAL_LEN + name_len..CENTRAL_LEN + name_len + extra_len];
        while extra.len() >= 4 {
            let id = le_u16(extra, 0);
            let size = le_u16(extra, 2) as usize;
            let body = extra.get(4..4 + size).ok_or_else(|| corrupt("truncated extra field".into()))?;
            if id == 0x0001 {
                let mut at = 0;
                let mut take = |field: &mut u64| -> Result<(), ArchiveError> {
                    if *field == u32::MAX as u64 {
                        let bytes = body.get(at..at + 8).ok_or_else(|| corrupt("short zip64 field".into()))?;
                        *field = le_u64(bytes, 0);
                        at += 8;
                    }
                    Ok(())
                };
                take(&mut uncompressed_size)?;
                take(&mut compressed_size)?;
                take(&mut local_header_offset)?;
            }
            extra = &extra[4 + size..];
        }

        let method = match method_raw {
            0 => Method::Stored,
            8 => Method::Deflate,
            other => {
                return Err(ArchiveError::UnsupportedCompression {
                    name,
                    method: other,
                })
            }
        };
        if method == Method::Stored && compressed_size != uncompressed_size {
            return Err(corrupt(format!("stored entry {name} has mismatched sizes")));
        }
        if local_header_offset
            .checked_add(LOCAL_LEN as u64 + compressed_size)
            .is_none_or(|end| end > source.len())
        {
            return Err(corrupt(format!("entry {name} lies outside the archive")));
        }
        entries.push(ArchiveEntry {
            name,
            method,
            compressed_size,
            uncompressed_size,
            crc32,
            local_header_offset,
            payload_offset: OnceLock::new(),
        });
        pos += var_end;
    }
    if (entries.len() as u64) != dir.entries {
        return Err(corrupt(format!(
            "directory declares {} entries, found {}",
            dir.entries,
            entries.len()
        )));
    }
    Ok(entries)
}
