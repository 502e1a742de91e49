//! Streams the worksheet through a fixed ring of small buffers while parser
//! threads consume it, so memory stays constant whatever the file size.
//!
//! `cargo run --release --example interleaved -- file.xlsx [parsers] [elements] [element_size]`

use sheetreader::bench::gen::{generate_xlsx, GenSpec};
use sheetreader::sysmem::peak_rss;
use sheetreader::{EngineOptions, Mode, SheetSelector, Workbook};

fn main() -> sheetreader::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = match args.next() {
        Some(p) => p.into(),
        None => {
            let d = std::env::temp_dir().join("sheetreader-examples");
            std::fs::create_dir_all(&d)?;
            generate_xlsx(&GenSpec::mixed(20_000), d.join("mixed.xlsx"))?.xlsx
        }
    };
    let mut num = |default| args.next().and_then(|v| v.parse().ok()).unwrap_or(default);
    let parsers = num(2);
    let elements = num(1024);
    let element_size = num(32 * 1024);

    let wb = Workbook::open(&path)?;
    let options = EngineOptions::default().parser_threads(parsers).ring(elements, element_size);
    let (frame, phases) = wb.read_timed(&SheetSelector::Index(1), Mode::Interleaved, &options)?;
    print!("{}", frame.summary());
    println!("{parsers} parsers over {elements} x {element_size} bytes: {phases}");
    if let Some(rss) = peak_rss() {
        println!("peak resident set {:.1} MB", rss as f64 / 1e6);
    }
    Ok(())
}
