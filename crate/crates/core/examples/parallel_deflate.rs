//! Recompresses a worksheet with dictionary resets, then inflates and parses
//! the segments between resets in parallel.
//!
//! `cargo run --release --example parallel_deflate -- file.xlsx [threads]`

use std::fs::File;
use std::io::BufWriter;

use sheetreader::bench::gen::{generate_xlsx, GenSpec};
use sheetreader::pardeflate::{repack_entry, sidecar_path, write_index, DEFAULT_BOUNDARY_INTERVAL};
use sheetreader::{EngineOptions, Mode, SheetSelector, Workbook};

fn main() -> sheetreader::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = std::env::temp_dir().join("sheetreader-examples");
    std::fs::create_dir_all(&dir)?;
    let path = match args.next() {
        Some(p) => p.into(),
        None => generate_xlsx(&GenSpec::numeric(100_000, 20), dir.join("numeric.xlsx"))?.xlsx,
    };
    let threads = args.next().and_then(|t| t.parse().ok()).unwrap_or(8);

    let original = Workbook::open(&path)?;
    let sheet = original.meta().select(&SheetSelector::Index(1))?.path.clone();
    let repacked = dir.join("repacked.xlsx");
    let out = BufWriter::new(File::create(&repacked)?);
    let (out, index) = repack_entry(original.archive(), &sheet, DEFAULT_BOUNDARY_INTERVAL, 6, out)?;
    out.into_inner().map_err(|e| e.into_error())?;
    write_index(sidecar_path(&repacked), &index)?;
    println!(
        "{} boundaries, segments for {threads} workers start at {:?}",
        index.boundaries.len(),
        index.segments(threads).iter().map(|s| s.1).collect::<Vec<_>>()
    );

    // `open` picks up the sidecar written next to the file.
    let wb = Workbook::open(&repacked)?;
    let options = EngineOptions::default().threads(threads);
    let (frame, phases) = wb.read_timed(&SheetSelector::Index(1), Mode::ParallelDeflate, &options)?;
    let (base, base_phases) = original.read_timed(&SheetSelector::Index(1), Mode::Interleaved, &EngineOptions::default())?;
    assert_eq!(frame, base);
    println!("parallel-deflate: {phases}");
    println!("interleaved:      {base_phases}");
    Ok(())
}
