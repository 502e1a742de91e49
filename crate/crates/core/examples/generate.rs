//! Writes a synthetic workbook and its ground-truth CSV.
//!
//! `cargo run --example generate -- out.xlsx 10000`

use sheetreader::bench::gen::{generate_xlsx, GenSpec};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "mixed.xlsx".into());
    let rows = args.next().and_then(|r| r.parse().ok()).unwrap_or(10_000);

    // 40 float, 30 integer and 30 text columns, a tenth of the cells blank.
    let spec = GenSpec::mixed(rows).blank(0.1).seed(7);
    let g = generate_xlsx(&spec, &path)?;
    println!(
        "{}: {} rows x {} cols, sheet {} bytes ({} compressed), {} shared strings",
        g.xlsx.display(),
        g.summary.rows,
        g.summary.cols,
        g.summary.sheet_bytes,
        g.summary.sheet_compressed_bytes,
        g.summary.shared_strings
    );
    println!("ground truth in {}", g.csv.display());
    Ok(())
}
