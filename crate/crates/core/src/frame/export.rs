//! CSV export.

use std::io::{self, Write};

use super::{ColumnFrame, Transformer};

/// Writes `frame` as CSV: header record when the frame has column names,
/// minimal quoting, nulls as empty fields.
pub fn write_csv<W: Write>(frame: &ColumnFrame, out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    let map = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    };
    if let Some(h) = frame.header_names() {
        w.write_record(h).map_err(map)?;
    }
    if frame.n_cols() > 0 {
        let mut field = String::new();
        for row in 0..frame.n_rows() {
            for col in frame.columns() {
                field.clear();
                col.write_value(row, &mut field);
                w.write_field(&field).map_err(map)?;
            }
            w.write_record(None::<&[u8]>).map_err(map)?;
        }
    }
    w.flush()
}

/// [`Transformer`] producing CSV bytes.
#[derive(Clone, Copy, Debug, Default)]
pub struct CsvTransformer;

impl Transformer for CsvTransformer {
    type Output = Vec<u8>;

    fn transform(self, frame: &ColumnFrame) -> Vec<u8> {
        let mut out = Vec::new();
        write_csv(frame, &mut out).expect("writing to a Vec cannot fail");
        out
    }
}
