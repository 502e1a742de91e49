//! Benchmark report rows and their CSV form.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

/// Averages of one benchmark configuration. Times in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub config: String,
    pub mode: String,
    pub threads: usize,
    pub rows: u64,
    pub wall_ms: f64,
    pub peak_rss_bytes: u64,
    pub decompress_ms: f64,
    pub parse_ms: f64,
    pub strings_ms: f64,
    pub transform_ms: f64,
    /// Runs that completed.
    pub repeats: u32,
    /// Whether OS caches were dropped before each run (done manually).
    pub caches_cleared: bool,
    /// Last child failure, empty when all runs succeeded.
    pub error: String,
}

/// One resident-set sample of a child process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySample {
    pub elapsed_ms: f64,
    pub rss_bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Samples of the last run of each row, same order as `rows`.
    pub samples: Vec<Vec<MemorySample>>,
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "config",
    "mode",
    "threads",
    "rows",
    "wall_ms",
    "peak_rss_bytes",
    "decompress_ms",
    "parse_ms",
    "strings_ms",
    "transform_ms",
    "repeats",
    "caches_cleared",
    "error",
];

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}")),
    }
}

/// Writes the report rows as CSV; the header is written even when empty.
pub fn emit_report<W: Write>(report: &BenchReport, out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for row in &report.rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn read_report<R: Read>(input: R) -> io::Result<Vec<BenchRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err)
}

/// Samples as `config,elapsed_ms,rss_bytes` lines.
pub fn emit_samples<W: Write>(report: &BenchReport, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["config", "elapsed_ms", "rss_bytes"]).map_err(csv_err)?;
    for (row, samples) in report.rows.iter().zip(&report.samples) {
        for s in samples {
            w.write_record([row.config.clone(), format!("{:.1}", s.elapsed_ms), s.rss_bytes.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()
}
