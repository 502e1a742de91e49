//! Minimal ZIP writer for generated workbooks and repacked entries.
//!
//! Local headers are written with placeholder sizes and patched after the
//! payload, so the output never needs data descriptors. Classic (non-ZIP64)
//! records only; entries must stay below 4 GiB.

use std::io::{self, Seek, SeekFrom, Write};

use flate2::write::DeflateEncoder;
use flate2::Compression;

const SIG_LOCAL: u32 = 0x0403_4b50;
const SIG_CENTRAL: u32 = 0x0201_4b50;
const SIG_EOCD: u32 = 0x0605_4b50;
/// 1980-01-01 00:00 in DOS date/time form, fixed for reproducible output.
const DOS_TIME: u16 = 0;
const DOS_DATE: u16 = (1 << 5) | 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryMethod {
    Stored,
    Deflate,
    DeflateLevel(u32),
}

struct CentralRecord {
    name: String,
    method: u16,
    crc: u32,
    compressed: u64,
    uncompressed: u64,
    offset: u64,
}

pub struct ZipWriter<W: Write + Seek> {
    out: W,
    records: Vec<CentralRecord>,
}

impl<W: Write + Seek> ZipWriter<W> {
    pub fn new(out: W) -> Self {
        ZipWriter {
            out,
            records: Vec::new(),
        }
    }

    pub fn start_entry(&mut self, name: &str, method: EntryMethod) -> io::Result<EntryWriter<'_, W>> {
        let offset = self.begin_local(name, method_code(method))?;
        let sink = Counting {
            inner: &mut self.out,
            count: 0,
        };
        let body = match method {
            EntryMethod::Stored => Body::Plain(sink),
            EntryMethod::Deflate => Body::Deflate(DeflateEncoder::new(sink, Compression::default())),
            EntryMethod::DeflateLevel(level) => Body::Deflate(DeflateEncoder::new(sink, Compression::new(level))),
        };
        Ok(EntryWriter {
            records: &mut self.records,
            name: name.to_string(),
            method: method_code(method),
            offset,
            body: Some(body),
            crc: crc32fast::Hasher::new(),
            uncompressed: 0,
            raw_meta: None,
        })
    }

    /// Starts an entry whose payload is already compressed; the caller
    /// supplies the CRC and size of the uncompressed content.
    pub fn start_raw_entry(
        &mut self,
        name: &str,
        deflated: bool,
        crc: u32,
        uncompressed: u64,
    ) -> io::Result<EntryWriter<'_, W>> {
        let method = if deflated { 8 } else { 0 };
        let offset = self.begin_local(name, method)?;
        Ok(EntryWriter {
            records: &mut self.records,
            name: name.to_string(),
            method,
            offset,
            body: Some(Body::Plain(Counting {
                inner: &mut self.out,
                count: 0,
            })),
            crc: crc32fast::Hasher::new(),
            uncompressed: 0,
            raw_meta: Some((crc, uncompressed)),
        })
    }

    fn begin_local(&mut self, name: &str, method: u16) -> io::Result<u64> {
        let offset = self.out.stream_position()?;
        let mut h = Vec::with_capacity(30 + name.len());
        h.extend_from_slice(&SIG_LOCAL.to_le_bytes());
        h.extend_from_slice(&20u16.to_le_bytes());
        h.extend_from_slice(&0u16.to_le_bytes());
        h.extend_from_slice(&method.to_le_bytes());
        h.extend_from_slice(&DOS_TIME.to_le_bytes());
        h.extend_from_slice(&DOS_DATE.to_le_bytes());
        h.extend_from_slice(&[0u8; 12]);
        h.extend_from_slice(&(name.len() as u16).to_le_bytes());
        h.extend_from_slice(&0u16.to_le_bytes());
        h.extend_from_slice(name.as_bytes());
        self.out.write_all(&h)?;
        Ok(offset)
    }

    pub fn finish(mut self) -> io::Result<W> {
        let cd_start = self.out.stream_position()?;
        for r in &self.records {
            let mut h = Vec::with_capacity(46 + r.name.len());
            h.extend_from_slice(&SIG_CENTRAL.to_le_bytes());
            h.extend_from_slice(&20u16.to_le_bytes());
            h.extend_from_slice(&20u16.to_le_bytes());
            h.extend_from_slice(&0u16.to_le_bytes());
            h.extend_from_slice(&r.method.to_le_bytes());
            h.extend_from_slice(&DOS_TIME.to_le_bytes());
            h.extend_from_slice(&DOS_DATE.to_le_bytes());
            h.extend_from_slice(&r.crc.to_le_bytes());
            h.extend_from_slice(&narrow(r.compressed)?.to_le_bytes());
            h.extend_from_slice(&narrow(r.uncompressed)?.to_le_bytes());
            h.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
            h.extend_from_slice(&[0u8; 8]);
            h.extend_from_slice(&0u32.to_le_bytes());
            h.extend_from_slice(&narrow(r.offset)?.to_le_bytes());
            h.extend_from_slice(r.name.as_bytes());
            self.out.write_all(&h)?;
        }
        let cd_end = self.out.stream_position()?;
        let count = self.records.len() as u16;
        let mut e = Vec::with_capacity(22);
        e.extend_from_slice(&SIG_EOCD.to_le_bytes());
        e.extend_from_slice(&[0u8; 4]);
        e.extend_from_slice(&count.to_le_bytes());
        e.extend_from_slice(&count.to_le_bytes());
        e.extend_from_slice(&narrow(cd_end - cd_start)?.to_le_bytes());
        e.extend_from_slice(&narrow(cd_start)?.to_le_bytes());
        e.extend_from_slice(&0u16.to_le_bytes());
        self.out.write_all(&e)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

fn method_code(method: EntryMethod) -> u16 {
    match method {
        EntryMethod::Stored => 0,
        EntryMethod::Deflate | EntryMethod::DeflateLevel(_) => 8,
    }
}

fn narrow(v: u64) -> io::Result<u32> {
    u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "entry exceeds 4 GiB (ZIP64 writing unsupported)"))
}

struct Counting<'a, W> {
    inner: &'a mut W,
    count: u64,
}

impl<W: Write> Write for Counting<'_, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

enum Body<'a, W: Write> {
    Plain(Counting<'a, W>),
    Deflate(DeflateEncoder<Counting<'a, W>>),
}

pub struct EntryWriter<'a, W: Write + Seek> {
    records: &'a mut Vec<CentralRecord>,
    name: String,
    method: u16,
    offset: u64,
    body: Option<Body<'a, W>>,
    crc: crc32fast::Hasher,
    uncompressed: u64,
    raw_meta: Option<(u32, u64)>,
}

impl<W: Write + Seek> EntryWriter<'_, W> {
    pub fn finish(mut self) -> io::Result<()> {
        let body = self.body.take().expect("entry finished once");
        let sink = match body {
            Body::Plain(sink) => sink,
            Body::Deflate(enc) => enc.finish()?,
        };
        let compressed = sink.count;
        let out = sink.inner;
        let (crc, uncompressed) = match self.raw_meta {
            Some(meta) => meta,
            None => (self.crc.clone().finalize(), self.uncompressed),
        };
        let end = out.stream_position()?;
        out.seek(SeekFrom::Start(self.offset + 14))?;
        out.write_all(&crc.to_le_bytes())?;
        out.write_all(&narrow(compressed)?.to_le_bytes())?;
        out.write_all(&narrow(uncompressed)?.to_le_bytes())?;
        out.seek(SeekFrom::Start(end))?;
        self.records.push(CentralRecord {
            name: std::mem::take(&mut self.name),
            method: self.method,
            crc,
            compressed,
            uncompressed,
            offset: self.offset,
        });
        Ok(())
    }
}

impl<W: Write + Seek> Write for EntryWriter<'_, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = match self.body.as_mut().expect("entry still open") {
            Body::Plain(sink) => sink.write(buf)?,
            Body::Deflate(enc) => enc.write(buf)?,
        };
        if self.raw_meta.is_none() {
            self.crc.update(&buf[..n]);
            self.uncompressed += n as u64;
        }
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        match self.body.as_mut().expect("entry still open") {
            Body::Plain(sink) => sink.flush(),
            Body::Deflate(enc) => enc.flush(),
        }
    }
}
