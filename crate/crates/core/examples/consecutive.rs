//! Decompresses the whole worksheet, then parses it in parallel chunks.
//!
//! `cargo run --release --example consecutive -- file.xlsx [threads]`

use sheetreader::bench::gen::{generate_xlsx, GenSpec};
use sheetreader::{EngineOptions, Mode, SheetSelector, Workbook};

fn main() -> sheetreader::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = tempfile_dir();
    let path = match args.next() {
        Some(p) => p.into(),
        None => generate_xlsx(&GenSpec::numeric(50_000, 20), dir.join("numeric.xlsx"))?.xlsx,
    };
    let threads = args.next().and_then(|t| t.parse().ok()).unwrap_or(8);

    let wb = Workbook::open(&path)?;
    let options = EngineOptions::default().threads(threads);
    let (frame, phases) = wb.read_timed(&SheetSelector::Index(1), Mode::Consecutive, &options)?;
    print!("{}", frame.summary());
    println!("{threads} threads: {phases}");
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join("sheetreader-examples");
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}
