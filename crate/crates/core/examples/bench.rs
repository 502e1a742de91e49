//! Benchmarks both engines on a generated file in child processes and prints
//! the report CSV. Build the binary first: `cargo build --release`.
//!
//! `cargo run --release --example bench -- [rows]`

use std::io;

use sheetreader::bench::gen::{generate_xlsx, GenSpec};
use sheetreader::bench::harness::{locate_binary, run_benchmark, BenchConfig, BenchOptions};
use sheetreader::bench::report::emit_report;
use sheetreader::Mode;

fn main() -> io::Result<()> {
    let rows = std::env::args().nth(1).and_then(|r| r.parse().ok()).unwrap_or(50_000);
    let dir = std::env::temp_dir().join("sheetreader-examples");
    std::fs::create_dir_all(&dir)?;
    let file = generate_xlsx(&GenSpec::numeric(rows, 20), dir.join("bench.xlsx"))?.xlsx;

    let binary = locate_binary().expect("sheetreader binary not found; run `cargo build --release` or set SHEETREADER_BIN");
    let mut matrix = Vec::new();
    for threads in [1, 2, 8] {
        let mut c = BenchConfig::new(&file, Mode::Consecutive);
        c.threads = threads;
        c.id = format!("consecutive/{threads}");
        matrix.push(c);
    }
    for parsers in [1, 2] {
        let mut c = BenchConfig::new(&file, Mode::Interleaved);
        c.parser_threads = parsers;
        c.id = format!("interleaved/{parsers}");
        matrix.push(c);
    }
    let mut options = BenchOptions::new(binary);
    options.repeat = 3;
    let report = run_benchmark(&matrix, &options);
    emit_report(&report, io::stdout().lock())
}
