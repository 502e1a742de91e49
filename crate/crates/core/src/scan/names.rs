//! On-the-fly element and attribute name recognition.
//!
//! Instead of copying a tag name and comparing strings, every known name has
//! a small counter that advances while the incoming bytes keep matching it.
//! At the name terminator the element is the name whose counter equals its
//! length. Only the names that are legal in the current context are tracked.

/// Element names the worksheet and shared-strings scanners care about.
pub const ELEMENT_NAMES: [&[u8]; 10] = [
    b"sheetData",
    b"dimension",
    b"row",
    b"c",
    b"v",
    b"is",
    b"t",
    b"si",
    b"sst",
    b"rPh",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Element {
    SheetData = 0,
    Dimension = 1,
    Row = 2,
    C = 3,
    V = 4,
    Is = 5,
    T = 6,
    Si = 7,
    Sst = 8,
    RPh = 9,
}

impl Element {
    const ALL: [Element; 10] = [
        Element::SheetData,
        Element::Dimension,
        Element::Row,
        Element::C,
        Element::V,
        Element::Is,
        Element::T,
        Element::Si,
        Element::Sst,
        Element::RPh,
    ];

    pub const fn bit(self) -> u16 {
        1 << self as u16
    }

    pub fn name(self) -> &'static [u8] {
        ELEMENT_NAMES[self as usize]
    }
}

/// Attribute names with meaning to the scanners; everything else is skipped.
pub const ATTRIBUTE_NAMES: [&[u8]; 6] = [b"r", b"t", b"s", b"ref", b"count", b"uniqueCount"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Attribute {
    R = 0,
    T = 1,
    S = 2,
    Ref = 3,
    Count = 4,
    UniqueCount = 5,
}

impl Attribute {
    const ALL: [Attribute; 6] = [
        Attribute::R,
        Attribute::T,
        Attribute::S,
        Attribute::Ref,
        Attribute::Count,
        Attribute::UniqueCount,
    ];

    pub const fn bit(self) -> u16 {
        1 << self as u16
    }
}

/// Counter-per-name matcher over a fixed name table.
///
/// `counters[i]` only advances while every byte so far matched name `i`; the
/// first mismatch resets it to 0 and, because `seen` then runs ahead of it,
/// it can never reach the name length again for this name.
#[derive(Clone, Debug)]
pub struct NameMatcher<const N: usize> {
    table: &'static [&'static [u8]; N],
    counters: [u8; N],
    seen: u8,
    candidates: u16,
}

pub type ElementMatcher = NameMatcher<10>;
pub type AttributeMatcher = NameMatcher<6>;

impl ElementMatcher {
    pub fn elements() -> Self {
        NameMatcher::new(&ELEMENT_NAMES)
    }

    pub fn element(&self) -> Option<Element> {
        self.matched().map(|i| Element::ALL[i])
    }
}

impl AttributeMatcher {
    pub fn attributes() -> Self {
        NameMatcher::new(&ATTRIBUTE_NAMES)
    }

    pub fn attribute(&self) -> Option<Attribute> {
        self.matched().map(|i| Attribute::ALL[i])
    }
}

impl<const N: usize> NameMatcher<N> {
    pub fn new(table: &'static [&'static [u8]; N]) -> Self {
        NameMatcher {
            table,
            counters: [0; N],
            seen: 0,
            candidates: 0,
        }
    }

    /// Begins a new name, tracking only the names selected by `candidates`.
    #[inline]
    pub fn start(&mut self, candidates: u16) {
        self.counters = [0; N];
        self.seen = 0;
        self.candidates = candidates;
    }

    pub fn counter(&self, index: usize) -> u8 {
        self.counters[index]
    }

    /// Feeds one name byte. A `:` ends a namespace prefix and restarts matching
    /// so that names compare by local part.
    #[inline]
    pub fn push(&mut self, byte: u8) {
        if byte == b':' {
            self.counters = [0; N];
            self.seen = 0;
            return;
        }
        let mut bits = self.candidates;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let name = self.table[i];
            let c = self.counters[i];
            if c == self.seen && (c as usize) < name.len() && name[c as usize] == byte {
                self.counters[i] = c + 1;
            } else {
                self.counters[i] = 0;
            }
        }
        self.seen = self.seen.saturating_add(1);
    }

    /// The recognized name, if exactly one counter reached its name length.
    #[inline]
    pub fn matched(&self) -> Option<usize> {
        let mut bits = self.candidates;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if self.counters[i] as usize == self.table[i].len() {
                return Some(i);
            }
        }
        None
    }
}
