//! Feeds worksheet XML to the scanner in arbitrary pieces and prints the
//! cell events; the split points never change the output.

use sheetreader::scan::{CellEvent, CellSink, SheetScanner};

struct Print;

impl CellSink for Print {
    fn cell(&mut self, e: &CellEvent<'_>) {
        println!("row {} col {} {:?} {:?}", e.row, e.col, e.cell_type, e.value);
    }

    fn row(&mut self, row: u32) {
        println!("-- row {row}");
    }
}

const SHEET: &str = r#"<worksheet><dimension ref="A1:C2"/><sheetData>
<row r="1"><c r="A1"><v>1.5</v></c><c r="B1" t="s"><v>0</v></c><c r="C1" t="inlineStr"><is><t>a &amp; b</t></is></c></row>
<row r="2"><c r="A2" t="b"><v>1</v></c><c r="C2"><f>A1*2</f><v>3</v></c></row>
</sheetData></worksheet>"#;

fn main() -> Result<(), sheetreader::scan::ScanError> {
    let mut scanner = SheetScanner::new();
    for piece in SHEET.as_bytes().chunks(7) {
        scanner.feed(piece, usize::MAX, &mut Print)?;
    }
    scanner.finish()?;
    println!("{:?}", scanner.stats());
    Ok(())
}
