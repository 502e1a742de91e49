//! Shared-strings (`sst`) scanner.
//!
//! Each `<si>` yields one string: the concatenation of its `<t>` runs,
//! excluding phonetic `<rPh>` runs. The scanner is resumable over arbitrary
//! windows like the worksheet scanner, but always reads the part in order.

use memchr::{memchr, memchr2};

use super::entity::{decode_entity, MAX_ENTITY};
use super::names::{Attribute, AttributeMatcher, Element, ElementMatcher};
use super::{is_space, ScanError, ScanStats};

pub trait StringSink {
    /// Count announced by the `<sst>` root (`uniqueCount`, else `count`).
    fn expect(&mut self, _count: u32) {}

    fn string(&mut self, index: u32, text: &[u8]);
}

impl StringSink for Vec<Vec<u8>> {
    fn expect(&mut self, count: u32) {
        self.reserve(count as usize);
    }

    fn string(&mut self, _index: u32, text: &[u8]) {
        self.push(text.to_vec());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ctx {
    Outside,
    Sst,
    Item,
    Text,
    Phonetic,
    Done,
}

impl Ctx {
    fn open_candidates(self) -> u16 {
        match self {
            Ctx::Outside => Element::Sst.bit(),
            Ctx::Sst => Element::Si.bit(),
            Ctx::Item => Element::T.bit() | Element::RPh.bit(),
            _ => 0,
        }
    }

    fn close_candidates(self) -> u16 {
        match self {
            Ctx::Outside | Ctx::Done => 0,
            _ => Element::Sst.bit() | Element::Si.bit() | Element::T.bit() | Element::RPh.bit(),
        }
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
    AttrQuote,
    AttrValue,
    EmptyEnd,
    SkipTag,
    Markup,
    Entity,
}

#[derive(Clone, Debug)]
pub struct StringsScanner {
    ctx: Ctx,
    loc: Loc,
    elements: ElementMatcher,
    attributes: AttributeMatcher,
    tag: Option<Element>,
    attr: Option<Attribute>,
    quote: u8,
    skip_quote: u8,
    unique: Option<u32>,
    count: Option<u32>,
    acc: u32,
    index: u32,
    text: Vec<u8>,
    entity: [u8; MAX_ENTITY],
    entity_len: u8,
    base: u64,
    stats: ScanStats,
}

impl Default for StringsScanner {
    fn default() -> Self {
        StringsScanner::new()
    }
}

impl StringsScanner {
    pub fn new() -> Self {
        StringsScanner {
            ctx: Ctx::Outside,
            loc: Loc::Text,
            elements: ElementMatcher::elements(),
            attributes: AttributeMatcher::attributes(),
            tag: None,
            attr: None,
            quote: 0,
            skip_quote: 0,
            unique: None,
            count: None,
            acc: 0,
            index: 0,
            text: Vec::new(),
            entity: [0; MAX_ENTITY],
            entity_len: 0,
            base: 0,
            stats: ScanStats::default(),
        }
    }

    /// Strings emitted so far.
    pub fn emitted(&self) -> u32 {
        self.index
    }

    pub fn stats(&self) -> ScanStats {
        self.stats
    }

    pub fn finish(&self) -> Result<(), ScanError> {
        if self.loc == Loc::Text && matches!(self.ctx, Ctx::Done | Ctx::Outside) {
            Ok(())
        } else {
            Err(self.malformed(0, "unexpected end of shared strings"))
        }
    }

    fn malformed(&self, i: usize, reason: &'static str) -> ScanError {
        ScanError::MalformedDocument {
            position: self.base + i as u64,
            reason,
        }
    }

    pub fn feed<S: StringSink>(&mut self, window: &[u8], sink: &mut S) -> Result<(), ScanError> {
        let r = self.run(window, sink);
        self.base += window.len() as u64;
        self.stats.visited += window.len() as u64;
        r
    }

    fn run<S: StringSink>(&mut self, w: &[u8], sink: &mut S) -> Result<(), ScanError> {
        let n = w.len();
        let mut i = 0;
        while i < n {
            match self.loc {
                Loc::Text => {
                    if self.ctx == Ctx::Done {
                        return Ok(());
                    }
                    if self.ctx == Ctx::Text {
                        match memchr2(b'<', b'&', &w[i..]) {
                            Some(k) => {
                                self.text.extend_from_slice(&w[i..i + k]);
                                self.stats.copied += k as u64;
                                i += k + 1;
                                if w[i - 1] == b'&' {
                                    self.loc = Loc::Entity;
                                    self.entity_len = 0;
                                } else {
                                    self.loc = Loc::TagOpen;
                                }
                            }
                            None => {
                                self.text.extend_from_slice(&w[i..]);
                                self.stats.copied += (n - i) as u64;
                                i = n;
                            }
                        }
                    } else {
                        match memchr(b'<', &w[i..]) {
                            Some(k) => {
                                i += k + 1;
                                self.loc = Loc::TagOpen;
                            }
                            None => i = n,
                        }
                    }
                }
                Loc::TagOpen => {
                    let b = w[i];
                    i += 1;
                    match b {
                        b'/' => {
                            self.elements.start(self.ctx.close_candidates());
                            self.loc = Loc::CloseName;
                        }
                        b'?' | b'!' => self.loc = Loc::Markup,
                        _ => {
                            self.elements.start(self.ctx.open_candidates());
                            self.elements.push(b);
                            self.loc = Loc::OpenName;
                        }
                    }
                }
                Loc::OpenName => {
                    let b = w[i];
                    i += 1;
                    if !(is_space(b) || b == b'>' || b == b'/') {
                        self.elements.push(b);
                        continue;
                    }
                    self.tag = self.elements.element();
                    self.loc = match (self.tag, b) {
                        (None, b'>') => Loc::Text,
                        (None, _) => Loc::SkipTag,
                        (Some(_), b'>') => {
                            self.end_open_tag(false, sink);
                            Loc::Text
                        }
                        (Some(_), b'/') => Loc::EmptyEnd,
                        (Some(_), _) => Loc::Attrs,
                    };
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
                Loc::CloseTail | Loc::Markup => match memchr(b'>', &w[i..]) {
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
                            self.end_open_tag(false, sink);
                            self.loc = Loc::Text;
                        }
                        b'/' => self.loc = Loc::EmptyEnd,
                        _ if is_space(b) => {}
                        _ => {
                            let cands = if self.tag == Some(Element::Sst) {
                                Attribute::Count.bit() | Attribute::UniqueCount.bit()
                            } else {
                                0
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
                    if b == b'=' {
                        self.loc = Loc::AttrQuote;
                    } else if !is_space(b) {
                        self.attributes.push(b);
                    }
                }
                Loc::AttrQuote => {
                    let b = w[i];
                    i += 1;
                    if b == b'"' || b == b'\'' {
                        self.quote = b;
                        self.attr = self.attributes.attribute();
                        self.acc = 0;
                        self.loc = Loc::AttrValue;
                    } else if !is_space(b) {
                        return Err(self.malformed(i - 1, "expected quoted attribute value"));
                    }
                }
                Loc::AttrValue => {
                    while i < n {
                        let b = w[i];
                        i += 1;
                        if b == self.quote {
                            match self.attr {
                                Some(Attribute::UniqueCount) => self.unique = Some(self.acc),
                                Some(Attribute::Count) => self.count = Some(self.acc),
                                _ => {}
                            }
                            self.loc = Loc::Attrs;
                            break;
                        }
                        if self.attr.is_some() {
                            if !b.is_ascii_digit() {
                                return Err(ScanError::MalformedNumber(format!("string count byte {:?}", b as char)));
                            }
                            self.acc = self
                                .acc
                                .checked_mul(10)
                                .and_then(|v| v.checked_add((b - b'0') as u32))
                                .ok_or(ScanError::Overflow("string count"))?;
                        }
                    }
                }
                Loc::EmptyEnd => {
                    if w[i] != b'>' {
                        return Err(self.malformed(i, "expected `>` after `/`"));
                    }
                    i += 1;
                    self.end_open_tag(true, sink);
                    self.loc = Loc::Text;
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
        Ok(())
    }

    fn end_open_tag<S: StringSink>(&mut self, empty: bool, sink: &mut S) {
        match self.tag.take() {
            Some(Element::Sst) => {
                if let Some(c) = self.unique.or(self.count) {
                    sink.expect(c);
                }
                self.ctx = if empty { Ctx::Done } else { Ctx::Sst };
            }
            Some(Element::Si) => {
                self.text.clear();
                if empty {
                    self.emit(sink);
                } else {
                    self.ctx = Ctx::Item;
                }
            }
            Some(Element::T) if !empty => self.ctx = Ctx::Text,
            Some(Element::RPh) if !empty => self.ctx = Ctx::Phonetic,
            _ => {}
        }
    }

    fn close_tag<S: StringSink>(&mut self, e: Element, i: usize, sink: &mut S) -> Result<(), ScanError> {
        self.ctx = match (e, self.ctx) {
            (Element::Sst, Ctx::Sst) => Ctx::Done,
            (Element::Si, Ctx::Item) => {
                self.emit(sink);
                Ctx::Sst
            }
            (Element::T, Ctx::Text) => Ctx::Item,
            (Element::T, Ctx::Phonetic) => Ctx::Phonetic,
            (Element::RPh, Ctx::Phonetic) => Ctx::Item,
            _ => return Err(self.malformed(i, "closing tag does not match the open element")),
        };
        Ok(())
    }

    fn emit<S: StringSink>(&mut self, sink: &mut S) {
        sink.string(self.index, &self.text);
        self.index += 1;
    }
}

/// Reads the announced string count from the head of a shared-strings part.
pub(crate) fn announced_count(head: &[u8]) -> Option<u32> {
    struct Probe(Option<u32>);
    impl StringSink for Probe {
        fn expect(&mut self, count: u32) {
            self.0 = Some(count);
        }
        fn string(&mut self, _: u32, _: &[u8]) {}
    }
    let mut scanner = StringsScanner::new();
    let mut probe = Probe(None);
    let _ = scanner.feed(head, &mut probe);
    probe.0
}
