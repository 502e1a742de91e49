//! Concurrent construction of a [`ColumnFrame`].
//!
//! Every column is a pre-allocated vector of atomic 64-bit slots plus a
//! 4-bit kind per slot. Parsing threads write disjoint `(row, col)` slots
//! with relaxed stores while holding a shared read lock; the rare resize takes
//! the lock exclusively, so growth never overlaps an insertion. Joining the
//! threads publishes all writes to the finalizing thread.

use std::collections::TryReserveError;
use std::mem::ManuallyDrop;
use std::sync::atomic::{AtomicU32, AtomicU64, AtomicU8, Ordering};
use std::sync::{Arc, Mutex, PoisonError, RwLock, RwLockReadGuard};

use super::bitmap::Bitmap;
use super::format::{format_bool, write_date, write_double};
use super::{Column, ColumnData, ColumnFrame, ColumnType, SharedStrings};
use crate::error::{Error, Result};
use crate::scan::{column_name, CellEvent, CellSink, CellType, CellValue};

pub(crate) const NULL: u8 = 0;
pub(crate) const DOUBLE: u8 = 1;
pub(crate) const INTEGER: u8 = 2;
pub(crate) const BOOLEAN: u8 = 3;
pub(crate) const SHARED: u8 = 4;
pub(crate) const TEXT: u8 = 5;
pub(crate) const ERROR: u8 = 6;
pub(crate) const DATE: u8 = 7;

const TEXT_INDEX_BITS: u32 = 40;

/// Options applied while building and finalizing.
#[derive(Clone, Debug, Default)]
pub struct FrameOptions {
    /// Treat row 1 as column names.
    pub headers: bool,
    /// Style indexes whose number format is a date; such numeric cells are
    /// tagged as dates.
    pub date_styles: Option<Arc<[bool]>>,
}

struct ColumnSlots {
    values: Vec<AtomicU64>,
    /// Cell kinds, two 4-bit tags per byte.
    kinds: Vec<AtomicU8>,
}

#[inline]
fn nibble(row: usize) -> (usize, u32) {
    (row / 2, (row as u32 & 1) * 4)
}

/// Finished kind tags, still packed two per byte.
struct Kinds(Vec<u8>);

impl Kinds {
    #[inline]
    fn get(&self, row: usize) -> u8 {
        let (i, shift) = nibble(row);
        (self.0[i] >> shift) & 0xf
    }
}

impl ColumnSlots {
    fn with_rows(rows: usize) -> Result<Self, TryReserveError> {
        let mut values = Vec::new();
        values.try_reserve_exact(rows)?;
        values.resize_with(rows, || AtomicU64::new(0));
        let mut kinds = Vec::new();
        kinds.try_reserve_exact(rows.div_ceil(2))?;
        kinds.resize_with(rows.div_ceil(2), || AtomicU8::new(NULL));
        Ok(ColumnSlots { values, kinds })
    }

    fn grow(&mut self, rows: usize) -> Result<(), TryReserveError> {
        if rows > self.values.len() {
            self.values.try_reserve_exact(rows - self.values.len())?;
            self.values.resize_with(rows, || AtomicU64::new(0));
            let packed = rows.div_ceil(2);
            self.kinds.try_reserve_exact(packed - self.kinds.len())?;
            self.kinds.resize_with(packed, || AtomicU8::new(NULL));
        }
        Ok(())
    }
}

struct Slots {
    rows: usize,
    columns: Vec<ColumnSlots>,
}

/// Appended text of one writer; a slot refers to it as
/// `writer_id << 40 | index`.
#[derive(Default)]
struct TextArena {
    bytes: Vec<u8>,
    ends: Vec<usize>,
}

impl TextArena {
    fn push(&mut self, text: &[u8]) -> u64 {
        self.bytes.extend_from_slice(text);
        self.ends.push(self.bytes.len());
        (self.ends.len() - 1) as u64
    }

    fn get(&self, i: usize) -> &[u8] {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        &self.bytes[start..self.ends[i]]
    }
}

#[derive(Default)]
struct Shared {
    arenas: Vec<Option<TextArena>>,
    header: Vec<(u32, u8, u64)>,
    observed: Vec<u8>,
}

/// Shared, growable cell store filled by any number of [`FrameWriter`]s.
pub struct FrameBuilder {
    slots: RwLock<Slots>,
    options: FrameOptions,
    min_rows: u32,
    min_cols: u32,
    max_row: AtomicU32,
    max_col: AtomicU32,
    writers: AtomicU32,
    growths: AtomicU32,
    shared: Mutex<Shared>,
}

impl FrameBuilder {
    /// Pre-allocates `rows × cols` slots. The extent is also a lower bound
    /// for the finished frame (a declared dimension covers trailing blanks).
    pub fn new(rows: u32, cols: u32, options: FrameOptions) -> Result<Self> {
        let data_rows = if options.headers { rows.saturating_sub(1) } else { rows } as usize;
        let mut columns = Vec::new();
        columns.try_reserve_exact(cols as usize).map_err(|_| oom(cols as u64 * 16))?;
        for _ in 0..cols {
            columns.push(ColumnSlots::with_rows(data_rows).map_err(|_| oom(data_rows as u64 * 9))?);
        }
        Ok(FrameBuilder {
            slots: RwLock::new(Slots {
                rows: data_rows,
                columns,
            }),
            options,
            min_rows: rows,
            min_cols: cols,
            max_row: AtomicU32::new(0),
            max_col: AtomicU32::new(0),
            writers: AtomicU32::new(0),
            growths: AtomicU32::new(0),
            shared: Mutex::new(Shared::default()),
        })
    }

    /// Bytes needed to pre-allocate `rows × cols` slots.
    pub fn footprint(rows: u32, cols: u32) -> u64 {
        (rows as u64 * cols as u64 * 17).div_ceil(2)
    }

    pub fn writer(&self) -> FrameWriter<'_> {
        let id = self.writers.fetch_add(1, Ordering::Relaxed);
        assert!(id < 1 << (64 - TEXT_INDEX_BITS), "too many frame writers");
        FrameWriter {
            builder: self,
            guard: None,
            id,
            text: TextArena::default(),
            header: Vec::new(),
            observed: Vec::new(),
            max_row: 0,
            max_col: 0,
            date_styles: self.options.date_styles.clone(),
            headers: self.options.headers,
        }
    }

    /// Slot capacity as `(rows, cols)`.
    pub fn capacity(&self) -> (usize, usize) {
        let s = self.slots.read().unwrap_or_else(PoisonError::into_inner);
        (s.rows, s.columns.len())
    }

    /// How many times the store had to be resized.
    pub fn growths(&self) -> u32 {
        self.growths.load(Ordering::Relaxed)
    }

    /// Ensures capacity for `rows × cols` data slots, doubling the row
    /// capacity when it has to grow. Excludes all writers while it runs.
    pub fn grow(&self, rows: usize, cols: usize) -> Result<()> {
        let mut s = self.slots.write().unwrap_or_else(PoisonError::into_inner);
        if rows <= s.rows && cols <= s.columns.len() {
            return Ok(());
        }
        self.growths.fetch_add(1, Ordering::Relaxed);
        let new_rows = if rows > s.rows { rows.max(s.rows * 2) } else { s.rows };
        if new_rows > s.rows {
            for c in &mut s.columns {
                c.grow(new_rows).map_err(|_| oom(new_rows as u64 * 9))?;
            }
            s.rows = new_rows;
        }
        while s.columns.len() < cols {
            let c = ColumnSlots::with_rows(s.rows).map_err(|_| oom(s.rows as u64 * 9))?;
            s.columns.push(c);
        }
        Ok(())
    }

    /// Turns the collected cells into typed columns, resolving shared-string
    /// indexes against `strings`.
    pub fn finish(self, strings: Option<&SharedStrings>) -> Result<ColumnFrame> {
        let headers = self.options.headers;
        let max_row = self.max_row.load(Ordering::Relaxed).max(self.min_rows);
        let max_col = self.max_col.load(Ordering::Relaxed).max(self.min_cols) as usize;
        let n_rows = if headers { max_row.saturating_sub(1) } else { max_row } as usize;
        let shared = self.shared.into_inner().unwrap_or_else(PoisonError::into_inner);
        let mut slots = self.slots.into_inner().unwrap_or_else(PoisonError::into_inner);
        if slots.columns.len() < max_col || slots.rows < n_rows {
            // Only possible through declared extents larger than any write.
            let rows = n_rows.max(slots.rows);
            for c in &mut slots.columns {
                c.grow(rows).map_err(|_| oom(rows as u64 * 9))?;
            }
            while slots.columns.len() < max_col {
                slots.columns.push(ColumnSlots::with_rows(rows).map_err(|_| oom(rows as u64 * 9))?);
            }
        }
        let resolver = Resolver {
            strings,
            arenas: &shared.arenas,
        };

        let header_names = if headers {
            let mut names: Vec<String> = (1..=max_col as u32).map(column_name).collect();
            for &(col, kind, bits) in &shared.header {
                let mut s = String::new();
                resolver.render(kind, bits, &mut s)?;
                if !s.is_empty() {
                    names[col as usize - 1] = s;
                }
            }
            Some(names)
        } else {
            None
        };

        let mut columns = Vec::with_capacity(max_col);
        for (c, slot) in slots.columns.drain(..).take(max_col).enumerate() {
            let observed = shared.observed.get(c).copied().unwrap_or(0);
            columns.push(finish_column(slot, n_rows, observed, &resolver)?);
        }
        Ok(ColumnFrame {
            n_rows,
            columns,
            header_names,
        })
    }
}

fn oom(needed: u64) -> Error {
    Error::OutOfMemory { needed, available: 0 }
}

/// Writes cells into a [`FrameBuilder`]; one per parsing thread.
pub struct FrameWriter<'a> {
    builder: &'a FrameBuilder,
    guard: Option<RwLockReadGuard<'a, Slots>>,
    id: u32,
    text: TextArena,
    header: Vec<(u32, u8, u64)>,
    observed: Vec<u8>,
    max_row: u32,
    max_col: u32,
    date_styles: Option<Arc<[bool]>>,
    headers: bool,
}

impl FrameWriter<'_> {
    /// Drops the shared lock; must be called before blocking on anything a
    /// growing writer could be waiting for.
    pub fn release(&mut self) {
        self.guard = None;
    }

    /// Stores one value. `row` and `col` are 1-based.
    pub fn set(&mut self, row: u32, col: u32, kind: u8, bits: u64) {
        self.extend(row, col);
        if self.headers && row == 1 {
            self.header.push((col, kind, bits));
            return;
        }
        let r = (row - 1 - self.headers as u32) as usize;
        let c = (col - 1) as usize;
        if c >= self.observed.len() {
            self.observed.resize(c + 1, 0);
        }
        self.observed[c] |= 1 << kind;
        loop {
            let builder = self.builder;
            let slots = self
                .guard
                .get_or_insert_with(|| builder.slots.read().unwrap_or_else(PoisonError::into_inner));
            if r < slots.rows && c < slots.columns.len() {
                let column = &slots.columns[c];
                column.values[r].store(bits, Ordering::Relaxed);
                let (i, shift) = nibble(r);
                // Neighbouring rows share a byte and may be written by another
                // thread, hence the read-modify-write.
                let _old = column.kinds[i].fetch_or(kind << shift, Ordering::Relaxed);
                debug_assert_eq!((_old >> shift) & 0xf, NULL, "slot ({row}, {col}) written twice");
                return;
            }
            self.guard = None;
            if let Err(e) = builder.grow(r + 1, c + 1) {
                panic!("frame growth failed: {e}");
            }
        }
    }

    #[inline]
    fn extend(&mut self, row: u32, col: u32) {
        self.max_row = self.max_row.max(row);
        self.max_col = self.max_col.max(col);
    }

    fn store_event(&mut self, e: &CellEvent<'_>) {
        let (kind, bits) = match e.value {
            CellValue::Double(v) => {
                if self.is_date(e) {
                    (DATE, v.to_bits())
                } else {
                    (DOUBLE, v.to_bits())
                }
            }
            CellValue::Integer(v) => {
                if self.is_date(e) {
                    (DATE, (v as f64).to_bits())
                } else {
                    (INTEGER, v as u64)
                }
            }
            CellValue::Boolean(b) => (BOOLEAN, b as u64),
            CellValue::SharedString(i) => (SHARED, i as u64),
            CellValue::Text(t) => {
                let i = self.text.push(t);
                (TEXT, (self.id as u64) << TEXT_INDEX_BITS | i)
            }
            CellValue::Error => (ERROR, 0),
        };
        self.set(e.row, e.col, kind, bits);
    }

    fn is_date(&self, e: &CellEvent<'_>) -> bool {
        e.cell_type == CellType::Number
            && self
                .date_styles
                .as_ref()
                .is_some_and(|d| d.get(e.style as usize).copied().unwrap_or(false))
    }
}

impl CellSink for FrameWriter<'_> {
    #[inline]
    fn cell(&mut self, event: &CellEvent<'_>) {
        self.store_event(event);
    }

    fn row(&mut self, row: u32) {
        self.max_row = self.max_row.max(row);
    }

    fn blank(&mut self, row: u32, col: u32) {
        self.extend(row, col);
    }

    fn idle(&mut self) {
        self.release();
    }
}

impl Drop for FrameWriter<'_> {
    fn drop(&mut self) {
        self.guard = None;
        let b = self.builder;
        b.max_row.fetch_max(self.max_row, Ordering::Relaxed);
        b.max_col.fetch_max(self.max_col, Ordering::Relaxed);
        let mut shared = b.shared.lock().unwrap_or_else(PoisonError::into_inner);
        let id = self.id as usize;
        if shared.arenas.len() <= id {
            shared.arenas.resize_with(id + 1, || None);
        }
        if !self.text.ends.is_empty() {
            shared.arenas[id] = Some(std::mem::take(&mut self.text));
        }
        shared.header.append(&mut self.header);
        if shared.observed.len() < self.observed.len() {
            shared.observed.resize(self.observed.len(), 0);
        }
        for (acc, &o) in shared.observed.iter_mut().zip(&self.observed) {
            *acc |= o;
        }
    }
}

struct Resolver<'a> {
    strings: Option<&'a SharedStrings>,
    arenas: &'a [Option<TextArena>],
}

impl Resolver<'_> {
    fn shared(&self, index: u64) -> Result<&Arc<str>> {
        let count = self.strings.map_or(0, |s| s.len());
        self.strings
            .and_then(|s| s.get(index as usize))
            .ok_or(Error::DanglingStringIndex {
                index: index as u32,
                count,
            })
    }

    fn text(&self, bits: u64) -> &[u8] {
        let arena = self.arenas[(bits >> TEXT_INDEX_BITS) as usize]
            .as_ref()
            .expect("text slot refers to a live arena");
        arena.get((bits & ((1 << TEXT_INDEX_BITS) - 1)) as usize)
    }

    fn render(&self, kind: u8, bits: u64, out: &mut String) -> Result<()> {
        match kind {
            DOUBLE => write_double(out, f64::from_bits(bits)),
            INTEGER => {
                use std::fmt::Write;
                write!(out, "{}", bits as i64).expect("write to String");
            }
            BOOLEAN => out.push_str(format_bool(bits != 0)),
            DATE => write_date(out, f64::from_bits(bits)),
            SHARED => out.push_str(self.shared(bits)?),
            TEXT => out.push_str(&String::from_utf8_lossy(self.text(bits))),
            _ => {}
        }
        Ok(())
    }
}

/// Least upper bound of the observed kinds in the column type lattice.
pub(crate) fn column_type(observed: u8) -> ColumnType {
    let has = |k: u8| observed & (1 << k) != 0;
    let numeric = has(INTEGER) || has(DOUBLE) || has(DATE);
    if has(SHARED) || has(TEXT) || (has(BOOLEAN) && numeric) {
        ColumnType::String
    } else if has(DATE) {
        ColumnType::Date
    } else if has(DOUBLE) {
        ColumnType::Double
    } else if has(INTEGER) {
        ColumnType::Integer
    } else if has(BOOLEAN) {
        ColumnType::Boolean
    } else {
        ColumnType::Empty
    }
}

fn finish_column(slots: ColumnSlots, n_rows: usize, observed: u8, resolver: &Resolver<'_>) -> Result<Column> {
    let ColumnSlots { values, kinds } = slots;
    let kinds = Kinds(into_plain_u8(kinds));
    let mut values = into_plain_u64(values);
    values.truncate(n_rows);

    let mut validity = Bitmap::new(n_rows);
    let mut errors = 0;
    for i in 0..n_rows {
        match kinds.get(i) {
            NULL => {}
            ERROR => errors += 1,
            _ => validity.set(i),
        }
    }
    let ty = column_type(observed);
    let data = match ty {
        ColumnType::Empty => ColumnData::Empty,
        ColumnType::Boolean => ColumnData::Boolean(values.iter().map(|&v| v != 0).collect()),
        ColumnType::Integer => ColumnData::Integer(reinterpret(values, |v, _| v as i64, &kinds)),
        ColumnType::Double | ColumnType::Date => {
            let v = reinterpret(
                values,
                |v, k| match k {
                    INTEGER => v as i64 as f64,
                    DOUBLE | DATE => f64::from_bits(v),
                    _ => 0.0,
                },
                &kinds,
            );
            if ty == ColumnType::Date {
                ColumnData::Date(v)
            } else {
                ColumnData::Double(v)
            }
        }
        ColumnType::String => {
            let empty: Arc<str> = Arc::from("");
            let mut out = Vec::with_capacity(n_rows);
            let mut buf = String::new();
            for (i, &v) in values.iter().enumerate() {
                let k = kinds.get(i);
                out.push(match k {
                    NULL | ERROR => empty.clone(),
                    SHARED => resolver.shared(v)?.clone(),
                    _ => {
                        buf.clear();
                        resolver.render(k, v, &mut buf)?;
                        Arc::from(buf.as_str())
                    }
                });
            }
            ColumnData::String(out)
        }
    };
    Ok(Column {
        data,
        validity,
        errors,
    })
}

fn into_plain_u64(v: Vec<AtomicU64>) -> Vec<u64> {
    let mut v = ManuallyDrop::new(v);
    // SAFETY: AtomicU64 has the same size, alignment and bit validity as u64.
    unsafe { Vec::from_raw_parts(v.as_mut_ptr().cast::<u64>(), v.len(), v.capacity()) }
}

fn into_plain_u8(v: Vec<AtomicU8>) -> Vec<u8> {
    let mut v = ManuallyDrop::new(v);
    // SAFETY: AtomicU8 has the same size, alignment and bit validity as u8.
    unsafe { Vec::from_raw_parts(v.as_mut_ptr().cast::<u8>(), v.len(), v.capacity()) }
}

/// Maps the raw slots to an 8-byte element type in place, reusing the
/// allocation so finalization does not double the column's footprint.
fn reinterpret<T: Copy>(values: Vec<u64>, f: impl Fn(u64, u8) -> T, kinds: &Kinds) -> Vec<T> {
    assert_eq!(std::mem::size_of::<T>(), 8);
    assert_eq!(std::mem::align_of::<T>(), 8);
    let mut values = ManuallyDrop::new(values);
    let (ptr, len, cap) = (values.as_mut_ptr(), values.len(), values.capacity());
    for i in 0..len {
        let k = kinds.get(i);
        // SAFETY: i < len; every slot is read once and overwritten with a
        // value of the same size before any other slot is touched.
        unsafe {
            let raw = ptr.add(i).read();
            ptr.add(i).cast::<T>().write(f(raw, k));
        }
    }
    // SAFETY: same allocation, identical size and alignment per element, all
    // `len` elements initialized as `T` above (kinds covers all of them).
    unsafe { Vec::from_raw_parts(ptr.cast::<T>(), len, cap) }
}
