//! A custom [`Transformer`]: turns the column frame into per-column sums,
//! the way a language binding would turn it into its own data structures.

use sheetreader::bench::gen::{generate_xlsx, GenSpec};
use sheetreader::frame::{ColumnData, Transformer};
use sheetreader::{read_sheet, ColumnFrame, EngineOptions, Mode};

struct Sums;

impl Transformer for Sums {
    type Output = Vec<(String, Option<f64>)>;

    fn transform(self, frame: &ColumnFrame) -> Self::Output {
        frame
            .columns()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let valid = |r: &usize| c.is_valid(*r);
                let sum = match c.data() {
                    ColumnData::Integer(v) => Some((0..v.len()).filter(valid).map(|r| v[r] as f64).sum()),
                    ColumnData::Double(v) => Some((0..v.len()).filter(valid).map(|r| v[r]).sum()),
                    _ => None,
                };
                (frame.column_label(i), sum)
            })
            .collect()
    }
}

fn main() -> sheetreader::Result<()> {
    let dir = std::env::temp_dir().join("sheetreader-examples");
    std::fs::create_dir_all(&dir)?;
    let g = generate_xlsx(&GenSpec::numeric(1000, 4).blank(0.2), dir.join("sums.xlsx"))?;
    let frame = read_sheet(&g.xlsx, 1usize, Mode::Interleaved, &EngineOptions::default())?;
    for (name, sum) in frame.transform(Sums) {
        println!("{name}: {sum:?}");
    }
    Ok(())
}
