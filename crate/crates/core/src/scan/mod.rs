//! Resumable byte-level scanning of SpreadsheetML parts.
//!
//! The scanners never build a tree and never copy tag or attribute names.
//! They consume arbitrary byte windows, keep every partially seen construct
//! in their state and hand typed cell events to a [`CellSink`].

mod anchor;
mod entity;
mod names;
mod number;
mod refs;
mod sheet;
mod strings;
pub mod tags;

use thiserror::Error;

pub use anchor::{prescan_positions, resolve_chunk_start, tail_extent, Anchor, AnchorKind, ChunkPosition, Prescan};
pub use entity::decode_entity;
pub use names::{Attribute, AttributeMatcher, Element, ElementMatcher, NameMatcher, ATTRIBUTE_NAMES, ELEMENT_NAMES};
pub use number::{parse_double, Number, NumberAccumulator};
pub use refs::{column_name, parse_cell_ref, push_column_letter, push_decimal, MAX_COLUMN, MAX_ROW};
pub use sheet::{Context, SheetScanner};
pub use strings::{StringSink, StringsScanner};
pub(crate) use strings::announced_count;

#[derive(Debug, Error, Clone, PartialEq)]
#[non_exhaustive]
pub enum ScanError {
    #[error("malformed document at byte {position}: {reason}")]
    MalformedDocument { position: u64, reason: &'static str },
    #[error("{0} out of range")]
    Overflow(&'static str),
    #[error("malformed cell reference `{0}`")]
    MalformedRef(String),
    #[error("malformed number `{0}`")]
    MalformedNumber(String),
    #[error("unknown cell type `{0}`")]
    UnknownCellType(String),
    #[error("window contains no structural tag")]
    NoAnchorFound,
    #[error("cell at byte {position} has no `r` attribute and its position is unknown")]
    LocationRequired { position: u64 },
}

/// Value kind declared by a cell's `t` attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellType {
    Number,
    SharedString,
    InlineString,
    Boolean,
    Error,
    /// Cached text result of a formula (`t="str"`), also used for `t="d"`.
    FormulaString,
}

impl CellType {
    pub fn from_attribute(value: &[u8]) -> Option<CellType> {
        Some(match value {
            b"" | b"n" => CellType::Number,
            b"s" => CellType::SharedString,
            b"inlineStr" => CellType::InlineString,
            b"b" => CellType::Boolean,
            b"e" => CellType::Error,
            b"str" | b"d" => CellType::FormulaString,
            _ => return None,
        })
    }

    /// Whether `<v>` content is deserialized in-situ as a number.
    pub fn numeric_value(self) -> bool {
        matches!(self, CellType::Number | CellType::SharedString | CellType::Boolean)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellValue<'a> {
    Double(f64),
    Integer(i64),
    SharedString(u32),
    Boolean(bool),
    Text(&'a [u8]),
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellEvent<'a> {
    pub row: u32,
    pub col: u32,
    pub cell_type: CellType,
    /// Index into the style table (`s` attribute), 0 when absent.
    pub style: u32,
    pub value: CellValue<'a>,
}

/// Owned copy of a [`CellEvent`], handy for collecting and comparing.
#[derive(Clone, Debug, PartialEq)]
pub struct OwnedCellEvent {
    pub row: u32,
    pub col: u32,
    pub cell_type: CellType,
    pub style: u32,
    pub value: OwnedValue,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OwnedValue {
    Double(f64),
    Integer(i64),
    SharedString(u32),
    Boolean(bool),
    Text(Vec<u8>),
    Error,
}

impl From<&CellEvent<'_>> for OwnedCellEvent {
    fn from(e: &CellEvent<'_>) -> Self {
        let value = match e.value {
            CellValue::Double(v) => OwnedValue::Double(v),
            CellValue::Integer(v) => OwnedValue::Integer(v),
            CellValue::SharedString(v) => OwnedValue::SharedString(v),
            CellValue::Boolean(v) => OwnedValue::Boolean(v),
            CellValue::Text(t) => OwnedValue::Text(t.to_vec()),
            CellValue::Error => OwnedValue::Error,
        };
        OwnedCellEvent {
            row: e.row,
            col: e.col,
            cell_type: e.cell_type,
            style: e.style,
            value,
        }
    }
}

/// Receiver of scanner output.
pub trait CellSink {
    fn cell(&mut self, event: &CellEvent<'_>);

    /// A `<row>` element was opened; reported even when it holds no cells.
    fn row(&mut self, _row: u32) {}

    /// A cell element without a value (`<c r="B2"/>`).
    fn blank(&mut self, _row: u32, _col: u32) {}

    /// The producer is about to block; sinks holding shared locks should
    /// release them here.
    fn idle(&mut self) {}
}

impl CellSink for Vec<OwnedCellEvent> {
    fn cell(&mut self, event: &CellEvent<'_>) {
        self.push(event.into());
    }
}

/// Discards everything; useful for pure throughput measurements.
#[derive(Default)]
pub struct NullSink;

impl CellSink for NullSink {
    fn cell(&mut self, _event: &CellEvent<'_>) {}
}

/// Outcome of one [`SheetScanner::feed`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feed {
    /// The whole window was consumed.
    Consumed,
    /// Scanning stopped before the `<` at this window offset, which belongs
    /// to the next chunk.
    Stopped(usize),
}

/// Work counters maintained by the scanners.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// Bytes classified by the state machine (each input byte at most once).
    pub visited: u64,
    /// Bytes copied into the float or text buffers.
    pub copied: u64,
    /// Cell events emitted.
    pub cells: u64,
}

#[inline]
pub(crate) fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}
