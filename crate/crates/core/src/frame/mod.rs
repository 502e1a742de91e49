//! Column-wise intermediate store and its export surfaces.
//!
//! A [`ColumnFrame`] is what every engine produces: typed dense columns with
//! validity bitmaps. Bindings consume it through [`Transformer`].

mod bitmap;
mod builder;
mod export;
pub mod format;

use std::fmt::{self, Write as _};
use std::sync::Arc;

pub use bitmap::Bitmap;
pub use builder::{FrameBuilder, FrameOptions, FrameWriter};
pub use export::{write_csv, CsvTransformer};

use crate::scan::{column_name, StringSink};

/// Column type lattice: `Empty < Boolean < Integer < Double < Date < String`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColumnType {
    Empty,
    Boolean,
    Integer,
    Double,
    Date,
    String,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Empty => "empty",
            ColumnType::Boolean => "boolean",
            ColumnType::Integer => "integer",
            ColumnType::Double => "double",
            ColumnType::Date => "date",
            ColumnType::String => "string",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Empty,
    Boolean(Vec<bool>),
    Integer(Vec<i64>),
    Double(Vec<f64>),
    /// Serial day numbers (days since 1899-12-30, fraction = time of day).
    Date(Vec<f64>),
    String(Vec<Arc<str>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub(crate) data: ColumnData,
    pub(crate) validity: Bitmap,
    pub(crate) errors: usize,
}

impl Column {
    pub fn column_type(&self) -> ColumnType {
        match self.data {
            ColumnData::Empty => ColumnType::Empty,
            ColumnData::Boolean(_) => ColumnType::Boolean,
            ColumnData::Integer(_) => ColumnType::Integer,
            ColumnData::Double(_) => ColumnType::Double,
            ColumnData::Date(_) => ColumnType::Date,
            ColumnData::String(_) => ColumnType::String,
        }
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn validity(&self) -> &Bitmap {
        &self.validity
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.validity.get(row)
    }

    pub fn null_count(&self) -> usize {
        self.validity.len() - self.validity.count_ones()
    }

    /// Cells holding a spreadsheet error value; they count as nulls.
    pub fn error_count(&self) -> usize {
        self.errors
    }

    /// Appends the canonical text of `row` to `out`; nulls append nothing.
    pub fn write_value(&self, row: usize, out: &mut String) {
        if !self.is_valid(row) {
            return;
        }
        match &self.data {
            ColumnData::Empty => {}
            ColumnData::Boolean(v) => out.push_str(format::format_bool(v[row])),
            ColumnData::Integer(v) => write!(out, "{}", v[row]).expect("write to String"),
            ColumnData::Double(v) => format::write_double(out, v[row]),
            ColumnData::Date(v) => format::write_date(out, v[row]),
            ColumnData::String(v) => out.push_str(&v[row]),
        }
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        let data = match &self.data {
            ColumnData::Empty => 0,
            ColumnData::Boolean(v) => v.capacity(),
            ColumnData::Integer(v) => v.capacity() * 8,
            ColumnData::Double(v) | ColumnData::Date(v) => v.capacity() * 8,
            ColumnData::String(v) => v.capacity() * 16 + v.iter().map(|s| s.len()).sum::<usize>(),
        };
        data + self.validity.heap_bytes()
    }
}

/// The finished, environment-agnostic table.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnFrame {
    pub(crate) n_rows: usize,
    pub(crate) columns: Vec<Column>,
    pub(crate) header_names: Option<Vec<String>>,
}

impl ColumnFrame {
    pub fn empty() -> Self {
        ColumnFrame {
            n_rows: 0,
            columns: Vec::new(),
            header_names: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> Option<&Column> {
        self.columns.get(i)
    }

    pub fn header_names(&self) -> Option<&[String]> {
        self.header_names.as_deref()
    }

    /// Name of column `i`: its header when present, else its letters.
    pub fn column_label(&self, i: usize) -> String {
        match &self.header_names {
            Some(h) => h[i].clone(),
            None => column_name(i as u32 + 1),
        }
    }

    /// Non-null cells in the whole frame.
    pub fn value_count(&self) -> usize {
        self.columns.iter().map(|c| c.validity.count_ones()).sum()
    }

    /// Approximate heap bytes held by the columns.
    pub fn heap_bytes(&self) -> usize {
        self.columns.iter().map(Column::heap_bytes).sum()
    }

    /// Human-readable shape, types and null counts.
    pub fn summary(&self) -> String {
        let mut s = format!("rows={} cols={}\n", self.n_rows, self.columns.len());
        for (i, c) in self.columns.iter().enumerate() {
            writeln!(
                s,
                "{}\t{}\tnulls={}/{}",
                self.column_label(i),
                c.column_type(),
                c.null_count(),
                self.n_rows
            )
            .expect("write to String");
        }
        s
    }

    pub fn transform<T: Transformer>(&self, t: T) -> T::Output {
        t.transform(self)
    }
}

/// Converts a finished frame into a target representation (CSV text, a
/// host-language table, …) without re-reading the spreadsheet.
pub trait Transformer {
    type Output;

    fn transform(self, frame: &ColumnFrame) -> Self::Output;
}

/// The shared-strings table, indexed by the numbers stored in `t="s"` cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SharedStrings {
    strings: Vec<Arc<str>>,
}

impl SharedStrings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Arc<str>> {
        self.strings.get(i)
    }

    pub fn push(&mut self, s: &str) {
        self.strings.push(Arc::from(s));
    }
}

impl StringSink for SharedStrings {
    fn expect(&mut self, count: u32) {
        // The announced count is a hint; cap it so a bogus value cannot
        // trigger a huge reservation.
        self.strings.reserve((count as usize).min(1 << 24));
    }

    fn string(&mut self, _index: u32, text: &[u8]) {
        self.strings.push(Arc::from(String::from_utf8_lossy(text)));
    }
}

impl<S: AsRef<str>> FromIterator<S> for SharedStrings {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        SharedStrings {
            strings: iter.into_iter().map(|s| Arc::from(s.as_ref())).collect(),
        }
    }
}
