//! Worksheet scanner: `sheetData` / `row` / `c` / `v` / `is` state machine.
//!
//! [`SheetScanner::feed`] accepts any window of the document and remembers
//! partially read tags, attribute values, entities and numbers, so feeding a
//! document in pieces produces exactly the events of a single feed.
//!
//! Chunk ownership follows the position of a cell's opening `<`: with a
//! `limit`, scanning stops at the first `<` at or beyond `limit` that does not
//! belong to an open cell. A scanner started in [`Context::Seek`] skips to the
//! first structural tag, which makes the two rules agree across chunks.

use memchr::{memchr, memchr2};

use super::entity::{decode_entity, MAX_ENTITY};
use super::names::{Attribute, AttributeMatcher, Element, ElementMatcher};
use super::number::{Number, NumberAccumulator};
use super::refs::{push_column_letter, push_decimal, MAX_COLUMN};
use super::{is_space, CellEvent, CellSink, CellType, CellValue, Feed, ScanError, ScanStats};

/// Where the scanner is in the worksheet structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// Position unknown: skip to the first `sheetData`, `row` or `c` tag.
    Seek,
    /// Before `<sheetData>`.
    Outside,
    SheetData,
    Row,
    Cell,
    Value,
    InlineStr,
    InlineText,
    /// Inside `<rPh>`, whose text is not part of the cell value.
    Phonetic,
    /// After `</sheetData>`.
    Done,
}

impl Context {
    fn open_candidates(self) -> u16 {
        match self {
            Context::Seek => Element::SheetData.bit() | Element::Row.bit() | Element::C.bit(),
            Context::Outside => Element::SheetData.bit(),
            Context::SheetData => Element::Row.bit(),
            Context::Row => Element::C.bit(),
            Context::Cell => Element::V.bit() | Element::Is.bit(),
            Context::InlineStr => Element::T.bit() | Element::RPh.bit(),
            Context::Value | Context::InlineText | Context::Phonetic | Context::Done => 0,
        }
    }

    fn close_candidates(self) -> u16 {
        const STRUCTURAL: u16 = Element::SheetData.bit()
            | Element::Row.bit()
            | Element::C.bit()
            | Element::V.bit()
            | Element::Is.bit()
            | Element::T.bit()
            | Element::RPh.bit();
        match self {
            Context::Seek => Element::SheetData.bit(),
            Context::Outside | Context::Done => 0,
            _ => STRUCTURAL,
        }
    }

    /// Inside a `<c>` element, where a chunk limit must not cut.
    pub fn in_cell(self) -> bool {
        matches!(
            self,
            Context::Cell | Context::Value | Context::InlineStr | Context::InlineText | Context::Phonetic
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Loc {
    Text,
    TagOpen,
    OpenName,
    CloseName,
    CloseTail,
    Attrs,
    AttrName,
    AttrEq,
    AttrQuote,
    AttrValue,
    EmptyEnd,
    SkipTag,
    Bang,
    /// Comment or CDATA section; ends at two `term` bytes followed by `>`.
    Terminated,
    Markup,
    Entity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RefPhase {
    Letters,
    Digits,
}

#[derive(Clone, Debug)]
pub struct SheetScanner {
    ctx: Context,
    loc: Loc,
    elements: ElementMatcher,
    attributes: AttributeMatcher,
    tag: Option<Element>,
    attr: Option<Attribute>,
    quote: u8,
    /// `SkipTag`: quote byte while inside an attribute value, else 0.
    skip_quote: u8,
    term: u8,
    term_run: u8,

    row: u32,
    col: u32,
    row_known: bool,
    col_known: bool,

    ref_row: u32,
    ref_col: u32,
    ref_phase: RefPhase,
    has_ref: bool,
    type_buf: [u8; 9],
    type_len: u8,
    type_overflow: bool,
    style_acc: u32,

    cell_row: u32,
    cell_col: u32,
    cell_type: CellType,
    cell_style: u32,
    cell_emitted: bool,
    numeric: bool,
    number: NumberAccumulator,
    text: Vec<u8>,
    entity: [u8; MAX_ENTITY],
    entity_len: u8,

    base: u64,
    stats: ScanStats,
}

impl Default for SheetScanner {
    fn default() -> Self {
        SheetScanner::new()
    }
}

impl SheetScanner {
    /// Scanner for a document read from its first byte.
    pub fn new() -> Self {
        SheetScanner::with_context(Context::Outside)
    }

    /// Scanner for a window starting at an arbitrary byte of the document.
    pub fn seeking() -> Self {
        SheetScanner::with_context(Context::Seek)
    }

    fn with_context(ctx: Context) -> Self {
        SheetScanner {
            ctx,
            loc: Loc::Text,
            elements: ElementMatcher::elements(),
            attributes: AttributeMatcher::attributes(),
            tag: None,
            attr: None,
            quote: 0,
            skip_quote: 0,
            term: 0,
            term_run: 0,
            row: 0,
            col: 0,
            row_known: ctx == Context::Outside,
            col_known: false,
            ref_row: 0,
            ref_col: 0,
            ref_phase: RefPhase::Letters,
            has_ref: false,
            type_buf: [0; 9],
            type_len: 0,
            type_overflow: false,
            style_acc: 0,
            cell_row: 0,
            cell_col: 0,
            cell_type: CellType::Number,
            cell_style: 0,
            cell_emitted: false,
            numeric: false,
            number: NumberAccumulator::new(),
            text: Vec::new(),
            entity: [0; MAX_ENTITY],
            entity_len: 0,
            base: 0,
            stats: ScanStats::default(),
        }
    }

    /// Scanner positioned just before a known structural tag, with the row
    /// and column reached so far (counted positionally by a prescan).
    ///
    /// `row` is the number of the last row opened before the anchor and
    /// `col` the column of the last cell of that row (0 if none).
    pub fn at_anchor(kind: super::AnchorKind, row: u32, col: u32) -> Self {
        use super::AnchorKind;
        let ctx = match kind {
            AnchorKind::SheetDataOpen => Context::Outside,
            AnchorKind::Row | AnchorKind::SheetDataClose => Context::SheetData,
            AnchorKind::Cell => Context::Row,
        };
        let mut s = SheetScanner::with_context(ctx);
        s.row = row;
        s.col = col;
        s.row_known = true;
        s.col_known = kind == AnchorKind::Cell;
        s
    }

    /// Returns the scanner to a fresh state in `ctx` while keeping buffer
    /// capacity, so ring workers do not allocate per element.
    pub fn reset(&mut self, seek: bool) {
        let text = std::mem::take(&mut self.text);
        let mut number = std::mem::take(&mut self.number);
        let stats = self.stats;
        *self = SheetScanner::with_context(if seek { Context::Seek } else { Context::Outside });
        self.text = text;
        self.text.clear();
        number.reset();
        self.number = number;
        self.stats = stats;
    }

    pub fn context(&self) -> Context {
        self.ctx
    }

    pub fn stats(&self) -> ScanStats {
        self.stats
    }

    /// Absolute position of the next byte to be fed.
    pub fn position(&self) -> u64 {
        self.base
    }

    /// True when the scanner sits between tags outside any cell, i.e. the
    /// next `<` may start a construct owned by another chunk.
    pub fn at_rest(&self) -> bool {
        self.loc == Loc::Text && !self.ctx.in_cell()
    }

    pub fn is_done(&self) -> bool {
        self.ctx == Context::Done
    }

    /// Checks that the document did not end inside a construct.
    pub fn finish(&self) -> Result<(), ScanError> {
        let complete = self.loc == Loc::Text
            && matches!(self.ctx, Context::Done | Context::Outside | Context::Seek);
        if complete {
            Ok(())
        } else {
            Err(self.malformed(0, "unexpected end of document"))
        }
    }

    fn malformed(&self, i: usize, reason: &'static str) -> ScanError {
        ScanError::MalformedDocument {
            position: self.base + i as u64,
            reason,
        }
    }

    /// Scans `window`; see the module documentation for `limit`.
    pub fn feed<S: CellSink>(&mut self, window: &[u8], limit: usize, sink: &mut S) -> Result<Feed, ScanError> {
        let r = self.run(window, limit, sink);
        let consumed = match r {
            Ok(Feed::Stopped(p)) => p,
            _ => window.len(),
        };
        self.stats.visited += consumed as u64;
        self.base += consumed as u64;
        r
    }

    fn run<S: CellSink>(&mut self, w: &[u8], limit: usize, sink: &mut S) -> Result<Feed, ScanError> {
        let n = w.len();
        let mut i = 0;
        while i < n {
            match self.loc {
                Loc::Text => {
                    let lt = match self.ctx {
                        Context::Done => return Ok(Feed::Consumed),
                        Context::Value if self.numeric => {
                            let mut j = i;
                            while j < n && w[j] != b'<' {
                                self.stats.copied += self.number.push(w[j]) as u64;
                                j += 1;
                            }
                            j
                        }
                        Context::Value | Context::InlineText => {
                            match memchr2(b'<', b'&', &w[i..]) {
                                Some(k) => {
                                    self.copy_text(&w[i..i + k]);
                                    if w[i + k] == b'&' {
                                        self.loc = Loc::Entity;
                                        self.entity_len = 0;
                                        i += k + 1;
                                        continue;
                                    }
                                    i + k
                                }
                                None => {
                                    self.copy_text(&w[i..]);
                                    n
                                }
                            }
                        }
                        _ => memchr(b'<', &w[i..]).map_or(n, |k| i + k),
                    };
                    if lt >= n {
                        return Ok(Feed::Consumed);
                    }
                    if lt >= limit && !self.ctx.in_cell() {
                        return Ok(Feed::Stopped(lt));
                    }
                    self.loc = Loc::TagOpen;
                    i = lt + 1;
                }
                Loc::TagOpen => {
                    let b = w[i];
                    i += 1;
                    match b {
                        b'/' => {
                            self.elements.start(self.ctx.close_candidates());
                            self.loc = Loc::CloseName;
                        }
                        b'?' => self.loc = Loc::Markup,
                        b'!' => self.loc = Loc::Bang,
                        _ => {
                            self.elements.start(self.ctx.open_candidates());
                            self.elements.push(b);
                            self.loc = Loc::OpenName;
                        }
                    }
                }
                Loc::OpenName => {
                    let b = w[i];
                    if !(is_space(b) || b == b'>' || b == b'/') {
                        self.elements.push(b);
                        i += 1;
                        continue;
                    }
                    match self.elements.element() {
                        None => self.loc = if b == b'>' { Loc::Text } else { Loc::SkipTag },
                        Some(e) => {
                            self.begin_tag(e);
                            self.loc = match b {
                                b'>' => {
                                    self.end_open_tag(false, i, sink)?;
                                    Loc::Text
                                }
                                b'/' => Loc::EmptyEnd,
                                _ => Loc::Attrs,
                            };
                        }
                    }
                    i += 1;
                }
                Loc::CloseName => {
                    let b = w[i];
                    i += 1;
                    if !(is_space(b) || b == b'>') {
                        self.elements.push(b);
                        continue;
                    }
                    if let Some(e) = self.elements.element() {
                        self.close_tag(e, i - 1, sink)?;
                    }
                    self.loc = if b == b'>' { Loc::Text } else { Loc::CloseTail };
                }
                Loc::CloseTail => match memchr(b'>', &w[i..]) {
                    Some(k) => {
                        i += k + 1;
                        self.loc = Loc::Text;
                    }
                    None => i = n,
                },
                Loc::Attrs => {
                    let b = w[i];
                    i += 1;
                    match b {
                        b'>' => {
                            self.end_open_tag(false, i - 1, sink)?;
                            self.loc = Loc::Text;
                        }
                        b'/' => self.loc = Loc::EmptyEnd,
                        _ if is_space(b) => {}
                        _ => {
                            let cands = match self.tag {
                                Some(Element::Row) => Attribute::R.bit(),
                                Some(Element::C) => Attribute::R.bit() | Attribute::T.bit() | Attribute::S.bit(),
                                _ => 0,
                            };
                            self.attributes.start(cands);
                            self.attributes.push(b);
                            self.loc = Loc::AttrName;
                        }
                    }
                }
                Loc::AttrName => {
                    let b = w[i];
                    i += 1;
                    match b {
                        b'=' => self.loc = Loc::AttrQuote,
                        _ if is_space(b) => self.loc = Loc::AttrEq,
                        _ => self.attributes.push(b),
                    }
                }
                Loc::AttrEq => {
                    let b = w[i];
                    i += 1;
                    match b {
                        b'=' => self.loc = Loc::AttrQuote,
                        _ if is_space(b) => {}
                        _ => return Err(self.malformed(i - 1, "expected `=` after attribute name")),
                    }
                }
                Loc::AttrQuote => {
                    let b = w[i];
                    i += 1;
                    match b {
                        b'"' | b'\'' => {
                            self.quote = b;
                            self.attr = self.attributes.attribute();
                            self.loc = Loc::AttrValue;
                        }
                        _ if is_space(b) => {}
                        _ => return Err(self.malformed(i - 1, "expected quoted attribute value")),
                    }
                }
                Loc::AttrValue => {
                    let Some(attr) = self.attr else {
                        match memchr(self.quote, &w[i..]) {
                            Some(k) => {
                                i += k + 1;
                                self.loc = Loc::Attrs;
                            }
                            None => i = n,
                        }
                        continue;
                    };
                    while i < n {
                        let b = w[i];
                        i += 1;
                        if b == self.quote {
                            self.loc = Loc::Attrs;
                            break;
                        }
                        self.attr_byte(attr, b)?;
                    }
                }
                Loc::EmptyEnd => {
                    if w[i] != b'>' {
                        return Err(self.malformed(i, "expected `>` after `/`"));
                    }
                    self.end_open_tag(true, i, sink)?;
                    self.loc = Loc::Text;
                    i += 1;
                }
                Loc::SkipTag => {
                    while i < n {
                        let b = w[i];
                        i += 1;
                        if self.skip_quote != 0 {
                            if b == self.skip_quote {
                                self.skip_quote = 0;
                            }
                        } else if b == b'"' || b == b'\'' {
                            self.skip_quote = b;
                        } else if b == b'>' {
                            self.loc = Loc::Text;
                            break;
                        }
                    }
                }
                Loc::Bang => {
                    let b = w[i];
                    i += 1;
                    (self.loc, self.term) = match b {
                        b'-' => (Loc::Terminated, b'-'),
                        b'[' => (Loc::Terminated, b']'),
                        b'>' => (Loc::Text, 0),
                        _ => (Loc::Markup, 0),
                    };
                    self.term_run = 0;
                }
                Loc::Terminated => {
                    while i < n {
                        let b = w[i];
                        i += 1;
                        if b == b'>' && self.term_run >= 2 {
                            self.loc = Loc::Text;
                            break;
                        }
                        self.term_run = if b == self.term { self.term_run.saturating_add(1) } else { 0 };
                    }
                }
                Loc::Markup => match memchr(b'>', &w[i..]) {
                    Some(k) => {
                        i += k + 1;
                        self.loc = Loc::Text;
                    }
                    None => i = n,
                },
                Loc::Entity => {
                    let b = w[i];
                    if b == b';' {
                        let len = self.entity_len as usize;
                        let before = self.text.len();
                        if !decode_entity(&self.entity[..len], &mut self.text) {
                            self.text.push(b'&');
                            self.text.extend_from_slice(&self.entity[..len]);
                            self.text.push(b';');
                        }
                        self.stats.copied += (self.text.len() - before) as u64;
                        self.loc = Loc::Text;
                        i += 1;
                    } else if b == b'<' || b == b'&' || self.entity_len as usize == MAX_ENTITY {
                        // Not a reference after all: keep the raw bytes and
                        // let Text handle the current byte.
                        let len = self.entity_len as usize;
                        self.text.push(b'&');
                        self.text.extend_from_slice(&self.entity[..len]);
                        self.stats.copied += len as u64 + 1;
                        self.loc = Loc::Text;
                        if b == b'&' {
                            self.loc = Loc::Entity;
                            self.entity_len = 0;
                            i += 1;
                        }
                    } else {
                        self.entity[self.entity_len as usize] = b;
                        self.entity_len += 1;
                        i += 1;
                    }
                }
            }
        }
        Ok(Feed::Consumed)
    }

    #[inline]
    fn copy_text(&mut self, bytes: &[u8]) {
        self.text.extend_from_slice(bytes);
        self.stats.copied += bytes.len() as u64;
    }

    fn begin_tag(&mut self, e: Element) {
        self.tag = Some(e);
        if e == Element::C || e == Element::Row {
            self.ref_row = 0;
            self.ref_col = 0;
            self.ref_phase = RefPhase::Letters;
            self.has_ref = false;
            self.type_len = 0;
            self.type_overflow = false;
            self.style_acc = 0;
        }
    }

    #[inline]
    fn attr_byte(&mut self, attr: Attribute, b: u8) -> Result<(), ScanError> {
        match (self.tag, attr) {
            (Some(Element::Row), Attribute::R) => {
                if !b.is_ascii_digit() {
                    return Err(ScanError::MalformedRef(format!("row {}", b as char)));
                }
                self.ref_row = push_decimal(self.ref_row, b)?;
                self.has_ref = true;
            }
            (Some(Element::C), Attribute::R) => {
                self.has_ref = true;
                match (self.ref_phase, b) {
                    (RefPhase::Letters, b'A'..=b'Z') => self.ref_col = push_column_letter(self.ref_col, b)?,
                    (_, b'0'..=b'9') if self.ref_col > 0 => {
                        self.ref_phase = RefPhase::Digits;
                        self.ref_row = push_decimal(self.ref_row, b)?;
                    }
                    _ => return Err(ScanError::MalformedRef(format!("unexpected byte {:?}", b as char))),
                }
            }
            (Some(Element::C), Attribute::T) => {
                let len = self.type_len as usize;
                if len < self.type_buf.len() {
                    self.type_buf[len] = b;
                    self.type_len += 1;
                } else {
                    self.type_overflow = true;
                }
            }
            (Some(Element::C), Attribute::S) => {
                if !b.is_ascii_digit() {
                    return Err(ScanError::MalformedNumber(format!("style index byte {:?}", b as char)));
                }
                self.style_acc = self
                    .style_acc
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((b - b'0') as u32))
                    .ok_or(ScanError::Overflow("style index"))?;
            }
            _ => {}
        }
        Ok(())
    }

    fn end_open_tag<S: CellSink>(&mut self, empty: bool, i: usize, sink: &mut S) -> Result<(), ScanError> {
        let Some(tag) = self.tag.take() else {
            return Ok(());
        };
        match tag {
            Element::SheetData => {
                self.ctx = if empty { Context::Done } else { Context::SheetData };
                self.row_known = true;
                self.row = 0;
            }
            Element::Row => {
                if self.has_ref {
                    if self.ref_row == 0 {
                        return Err(ScanError::MalformedRef("row 0".into()));
                    }
                    self.row = self.ref_row;
                    self.row_known = true;
                } else if self.row_known {
                    self.row = self
                        .row
                        .checked_add(1)
                        .filter(|&r| r <= super::MAX_ROW)
                        .ok_or(ScanError::Overflow("row number"))?;
                }
                if self.row_known {
                    sink.row(self.row);
                }
                self.col = 0;
                self.col_known = true;
                self.ctx = if empty { Context::SheetData } else { Context::Row };
            }
            Element::C => {
                let (row, col) = if self.has_ref {
                    if self.ref_phase != RefPhase::Digits || self.ref_row == 0 {
                        return Err(ScanError::MalformedRef("incomplete cell reference".into()));
                    }
                    self.row_known = true;
                    (self.ref_row, self.ref_col)
                } else if self.row_known && self.col_known {
                    if self.col >= MAX_COLUMN {
                        return Err(ScanError::Overflow("column"));
                    }
                    (self.row, self.col + 1)
                } else {
                    return Err(ScanError::LocationRequired {
                        position: self.base + i as u64,
                    });
                };
                self.row = row;
                self.col = col;
                self.col_known = true;
                let cell_type = if self.type_overflow {
                    None
                } else {
                    CellType::from_attribute(&self.type_buf[..self.type_len as usize])
                };
                let Some(cell_type) = cell_type else {
                    let t = String::from_utf8_lossy(&self.type_buf[..self.type_len as usize]).into_owned();
                    return Err(ScanError::UnknownCellType(t));
                };
                if empty {
                    sink.blank(row, col);
                    self.ctx = Context::Row;
                } else {
                    self.cell_row = row;
                    self.cell_col = col;
                    self.cell_type = cell_type;
                    self.cell_style = self.style_acc;
                    self.cell_emitted = false;
                    self.ctx = Context::Cell;
                }
            }
            Element::V => {
                if !empty {
                    self.numeric = self.cell_type.numeric_value();
                    self.number.reset();
                    self.text.clear();
                    self.ctx = Context::Value;
                }
            }
            Element::Is => {
                self.text.clear();
                if empty {
                    self.emit(CellValueSource::Text, sink);
                } else {
                    self.ctx = Context::InlineStr;
                }
            }
            Element::T => {
                if !empty {
                    self.ctx = Context::InlineText;
                }
            }
            Element::RPh => {
                if !empty {
                    self.ctx = Context::Phonetic;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn close_tag<S: CellSink>(&mut self, e: Element, i: usize, sink: &mut S) -> Result<(), ScanError> {
        let next = match (e, self.ctx) {
            (Element::SheetData, Context::SheetData | Context::Seek) => Context::Done,
            (Element::Row, Context::Row) => Context::SheetData,
            (Element::C, Context::Cell) => {
                if !self.cell_emitted {
                    sink.blank(self.cell_row, self.cell_col);
                }
                Context::Row
            }
            (Element::V, Context::Value) => {
                self.finish_value(sink)?;
                Context::Cell
            }
            (Element::Is, Context::InlineStr) => {
                self.emit(CellValueSource::Text, sink);
                Context::Cell
            }
            (Element::T, Context::InlineText) => Context::InlineStr,
            (Element::T, Context::Phonetic) => Context::Phonetic,
            (Element::RPh, Context::Phonetic) => Context::InlineStr,
            _ => return Err(self.malformed(i, "closing tag does not match the open element")),
        };
        self.ctx = next;
        Ok(())
    }

    fn finish_value<S: CellSink>(&mut self, sink: &mut S) -> Result<(), ScanError> {
        if !self.numeric {
            let source = if self.cell_type == CellType::Error {
                CellValueSource::Error
            } else {
                CellValueSource::Text
            };
            self.emit(source, sink);
            return Ok(());
        }
        let Some(number) = self.number.finish()? else {
            return Ok(());
        };
        let source = match (self.cell_type, number) {
            (CellType::SharedString, Number::Integer(i)) if (0..=u32::MAX as i64).contains(&i) => {
                CellValueSource::Shared(i as u32)
            }
            (CellType::Boolean, Number::Integer(i @ (0 | 1))) => CellValueSource::Bool(i == 1),
            (CellType::Number, n) => CellValueSource::Number(n),
            (_, n) => {
                let text = match n {
                    Number::Integer(i) => i.to_string(),
                    Number::Double(d) => d.to_string(),
                };
                return Err(ScanError::MalformedNumber(text));
            }
        };
        self.emit(source, sink);
        Ok(())
    }

    #[inline]
    fn emit<S: CellSink>(&mut self, source: CellValueSource, sink: &mut S) {
        let value = match source {
            CellValueSource::Number(Number::Integer(i)) => CellValue::Integer(i),
            CellValueSource::Number(Number::Double(d)) => CellValue::Double(d),
            CellValueSource::Shared(i) => CellValue::SharedString(i),
            CellValueSource::Bool(b) => CellValue::Boolean(b),
            CellValueSource::Text => CellValue::Text(&self.text),
            CellValueSource::Error => CellValue::Error,
        };
        sink.cell(&CellEvent {
            row: self.cell_row,
            col: self.cell_col,
            cell_type: self.cell_type,
            style: self.cell_style,
            value,
        });
        self.cell_emitted = true;
        self.stats.cells += 1;
    }
}

#[derive(Clone, Copy)]
enum CellValueSource {
    Number(Number),
    Shared(u32),
    Bool(bool),
    Text,
    Error,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::{OwnedCellEvent, OwnedValue};

    fn scan_all(doc: &[u8]) -> Vec<OwnedCellEvent> {
        let mut s = SheetScanner::new();
        let mut out = Vec::new();
        assert_eq!(s.feed(doc, usize::MAX, &mut out).unwrap(), Feed::Consumed);
        s.finish().unwrap();
        out
    }

    fn scan_bytewise(doc: &[u8]) -> Vec<OwnedCellEvent> {
        let mut s = SheetScanner::new();
        let mut out = Vec::new();
        for b in doc.chunks(1) {
            s.feed(b, usize::MAX, &mut out).unwrap();
        }
        s.finish().unwrap();
        out
    }

    fn wrap(rows: &str) -> Vec<u8> {
        format!(
            "<?xml version=\"1.0\"?><worksheet xmlns=\"x\"><dimension ref=\"A1:C3\"/>\
             <sheetData>{rows}</sheetData><pageMargins left=\"0.7\"/></worksheet>"
        )
        .into_bytes()
    }

    fn ev(row: u32, col: u32, cell_type: CellType, value: OwnedValue) -> OwnedCellEvent {
        OwnedCellEvent {
            row,
            col,
            cell_type,
            style: 0,
            value,
        }
    }

    #[test]
    fn shared_string_cell() {
        let frag = b"<row r=\"2\"><c r=\"B2\" t=\"s\"><v>0</v></c></row>";
        let doc = wrap(std::str::from_utf8(frag).unwrap());
        let expected = vec![ev(2, 2, CellType::SharedString, OwnedValue::SharedString(0))];
        assert_eq!(scan_all(&doc), expected);
        assert_eq!(frag.len(), 45);
        assert_eq!(scan_bytewise(&doc), expected);

        let mut s = SheetScanner::with_context(Context::SheetData);
        s.row_known = true;
        let mut out = Vec::new();
        for b in frag.chunks(1) {
            s.feed(b, usize::MAX, &mut out).unwrap();
        }
        assert_eq!(out, expected);
    }

    #[test]
    fn empty_row_has_no_cells() {
        let doc = wrap("<row r=\"1\"/><row r=\"2\"><c r=\"A2\"><v>5</v></c></row>");
        assert_eq!(scan_all(&doc), vec![ev(2, 1, CellType::Number, OwnedValue::Integer(5))]);
    }

    #[test]
    fn value_types() {
        let doc = wrap(concat!(
            "<row r=\"1\">",
            "<c r=\"A1\"><v>1.5</v></c>",
            "<c r=\"B1\" t=\"b\"><v>1</v></c>",
            "<c r=\"C1\" t=\"str\"><f>A1&amp;B1</f><v>a&lt;b</v></c>",
            "<c r=\"D1\" t=\"e\"><v>#DIV/0!</v></c>",
            "<c r=\"E1\" t=\"inlineStr\"><is><r><rPr><b/></rPr><t xml:space=\"preserve\">x </t></r>",
            "<r><t>y</t></r><rPh sb=\"0\"><t>z</t></rPh></is></c>",
            "<c r=\"F1\" s=\"3\"><v>-7</v></c>",
            "</row>"
        ));
        let got = scan_all(&doc);
        let mut styled = ev(1, 6, CellType::Number, OwnedValue::Integer(-7));
        styled.style = 3;
        assert_eq!(
            got,
            vec![
                ev(1, 1, CellType::Number, OwnedValue::Double(1.5)),
                ev(1, 2, CellType::Boolean, OwnedValue::Boolean(true)),
                ev(1, 3, CellType::FormulaString, OwnedValue::Text(b"a<b".to_vec())),
                ev(1, 4, CellType::Error, OwnedValue::Error),
                ev(1, 5, CellType::InlineString, OwnedValue::Text(b"x y".to_vec())),
                styled,
            ]
        );
        assert_eq!(scan_bytewise(&doc), got);
    }

    #[test]
    fn skipped_attribute_values_may_hold_markup() {
        let doc = wrap("<row r=\"1\" ht=\"15.75\" x=\"a>b\" spans=\"\"><c r=\"A1\" foo='<'><v>1</v></c></row>");
        assert_eq!(scan_all(&doc), vec![ev(1, 1, CellType::Number, OwnedValue::Integer(1))]);
    }

    #[test]
    fn positional_cells_without_refs() {
        let doc = wrap("<row><c><v>1</v></c><c/><c><v>3</v></c></row><row><c><v>4</v></c></row>");
        assert_eq!(
            scan_all(&doc),
            vec![
                ev(1, 1, CellType::Number, OwnedValue::Integer(1)),
                ev(1, 3, CellType::Number, OwnedValue::Integer(3)),
                ev(2, 1, CellType::Number, OwnedValue::Integer(4)),
            ]
        );
    }

    #[test]
    fn structural_impossibilities_abort() {
        for bad in [
            "<row r=\"1\"><c r=\"A1\"></v></c></row>",
            "<row r=\"1\"><c r=\"A1\"><v>1</c></row>",
            "<row r=\"1\"></sheetData>",
            "<row r=\"1\"><c r=\"A1\"></row>",
        ] {
            let doc = wrap(bad);
            let mut s = SheetScanner::new();
            let r = s.feed(&doc, usize::MAX, &mut Vec::new());
            assert!(matches!(r, Err(ScanError::MalformedDocument { .. })), "{bad}: {r:?}");
        }
    }

    #[test]
    fn truncated_document_is_reported() {
        let doc = wrap("<row r=\"1\"><c r=\"A1\"><v>1</v></c></row>");
        let cut = &doc[..doc.len() / 2 + 20];
        let mut s = SheetScanner::new();
        s.feed(cut, usize::MAX, &mut Vec::new()).unwrap();
        assert!(s.finish().is_err());
    }

    #[test]
    fn unknown_entities_are_kept() {
        let doc = wrap("<row r=\"1\"><c r=\"A1\" t=\"str\"><v>&nbsp;&#65;&amp &lt;</v></c></row>");
        assert_eq!(
            scan_all(&doc),
            vec![ev(1, 1, CellType::FormulaString, OwnedValue::Text(b"&nbsp;A&amp <".to_vec()))]
        );
    }

    #[test]
    fn comments_and_cdata_are_skipped() {
        let doc = wrap("<!-- <row r=\"9\"> --><row r=\"1\"><![CDATA[ <c> ]]><c r=\"A1\"><v>2</v></c></row>");
        assert_eq!(scan_all(&doc), vec![ev(1, 1, CellType::Number, OwnedValue::Integer(2))]);
    }

    #[test]
    fn limit_stops_at_next_owned_tag() {
        let doc = wrap("<row r=\"1\"><c r=\"A1\"><v>12345</v></c><c r=\"B1\"><v>2</v></c></row>");
        let v_at = doc.windows(3).position(|w| w == b"<v>").unwrap();
        let mut s = SheetScanner::new();
        let mut out = Vec::new();
        // The limit falls inside A1's value, so A1 is finished and B1 is left.
        let r = s.feed(&doc, v_at + 4, &mut out).unwrap();
        let b1 = doc.windows(8).position(|w| w == b"<c r=\"B1").unwrap();
        assert_eq!(r, Feed::Stopped(b1));
        assert_eq!(out, vec![ev(1, 1, CellType::Number, OwnedValue::Integer(12345))]);
        assert!(s.at_rest());

        let mut right = SheetScanner::seeking();
        let mut out = Vec::new();
        right.feed(&doc[v_at + 4..], usize::MAX, &mut out).unwrap();
        right.finish().unwrap();
        assert_eq!(out, vec![ev(1, 2, CellType::Number, OwnedValue::Integer(2))]);
    }

    #[test]
    fn stats_count_every_byte_once() {
        let doc = wrap("<row r=\"1\"><c r=\"A1\"><v>1.25</v></c><c r=\"B1\"><v>7</v></c></row>");
        let mut s = SheetScanner::new();
        s.feed(&doc, usize::MAX, &mut NullSinkForTest).unwrap();
        let st = s.stats();
        assert_eq!(st.visited, doc.len() as u64);
        assert_eq!(st.copied, 4);
        assert_eq!(st.cells, 2);
    }

    struct NullSinkForTest;
    impl CellSink for NullSinkForTest {
        fn cell(&mut self, _: &CellEvent<'_>) {}
    }
}
