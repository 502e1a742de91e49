//! Lists the parts of an XLSX container and the sheets its workbook declares.
//!
//! `cargo run --example inspect -- file.xlsx`

use sheetreader::{SheetSelector, Workbook};

fn main() -> sheetreader::Result<()> {
    let path = std::env::args().nth(1).expect("usage: inspect FILE.xlsx");
    let wb = Workbook::open(&path)?;
    for e in wb.archive().entries() {
        println!("{:>10} {:>10} {:?} {}", e.uncompressed_size, e.compressed_size, e.method, e.name);
    }
    for (i, sheet) in wb.meta().sheets.iter().enumerate() {
        let dim = wb.dimension(&SheetSelector::Index(i + 1))?;
        println!("sheet {} {:?} at {} extent {:?}", i + 1, sheet.name, sheet.path, dim.map(|d| (d.rows, d.cols)));
    }
    println!("shared strings: {:?}", wb.shared_strings_count()?);
    Ok(())
}
