//! Tag-level iteration over small, complete XML parts.
//!
//! Used for relationship files, the workbook part, styles and document
//! heads. Text content is ignored; comments, processing instructions and
//! CDATA sections are skipped.

use std::borrow::Cow;

use memchr::{memchr, memchr_iter, memmem};

use super::entity::decode_entity;
use super::is_space;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tag<'a> {
    /// Qualified name as written (`r:id`, `sheet`).
    pub name: &'a [u8],
    pub closing: bool,
    pub self_closing: bool,
    /// Raw bytes between the name and the closing `>` / `/>`.
    pub attrs: &'a [u8],
    /// Offset of the tag's `<` in the scanned buffer.
    pub offset: usize,
}

impl<'a> Tag<'a> {
    /// Name without namespace prefix.
    pub fn local_name(&self) -> &'a [u8] {
        local(self.name)
    }

    /// Iterates `(qualified name, raw value)` pairs.
    pub fn attributes(&self) -> Attributes<'a> {
        Attributes { rest: self.attrs }
    }

    /// Value of the attribute with exactly this qualified name, entities
    /// decoded.
    pub fn attr(&self, name: &[u8]) -> Option<Cow<'a, [u8]>> {
        self.attributes().find(|(n, _)| *n == name).map(|(_, v)| unescape(v))
    }

    /// Value of the first attribute whose local name matches.
    pub fn attr_local(&self, name: &[u8]) -> Option<Cow<'a, [u8]>> {
        self.attributes().find(|(n, _)| local(n) == name).map(|(_, v)| unescape(v))
    }
}

fn local(name: &[u8]) -> &[u8] {
    match memchr(b':', name) {
        Some(p) => &name[p + 1..],
        None => name,
    }
}

pub struct Attributes<'a> {
    rest: &'a [u8],
}

impl<'a> Iterator for Attributes<'a> {
    type Item = (&'a [u8], &'a [u8]);

    fn next(&mut self) -> Option<Self::Item> {
        let s = self.rest;
        let start = s.iter().position(|&b| !is_space(b) && b != b'/')?;
        let eq = start + memchr(b'=', &s[start..])?;
        let name_end = s[..eq].iter().rposition(|&b| !is_space(b)).map_or(start, |p| p + 1);
        let q = eq + 1 + s[eq + 1..].iter().position(|&b| !is_space(b))?;
        let quote = s[q];
        if quote != b'"' && quote != b'\'' {
            self.rest = &[];
            return None;
        }
        let end = q + 1 + memchr(quote, &s[q + 1..])?;
        self.rest = &s[end + 1..];
        Some((&s[start..name_end], &s[q + 1..end]))
    }
}

/// Decodes entity references in an attribute value.
pub fn unescape(raw: &[u8]) -> Cow<'_, [u8]> {
    if memchr(b'&', raw).is_none() {
        return Cow::Borrowed(raw);
    }
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'&' {
            if let Some(semi) = raw[i + 1..].iter().take(9).position(|&b| b == b';') {
                let body = &raw[i + 1..i + 1 + semi];
                if decode_entity(body, &mut out) {
                    i += semi + 2;
                    continue;
                }
            }
        }
        out.push(raw[i]);
        i += 1;
    }
    Cow::Owned(out)
}

/// Iterator over the tags of a buffer. Stops at a truncated tag.
pub struct Tags<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Tags<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Tags { buf, pos: 0 }
    }
}

impl<'a> Iterator for Tags<'a> {
    type Item = Tag<'a>;

    fn next(&mut self) -> Option<Tag<'a>> {
        let buf = self.buf;
        loop {
            let lt = self.pos + memchr(b'<', &buf[self.pos..])?;
            let rest = &buf[lt..];
            if let Some(skip) = markup_len(rest) {
                self.pos = lt + skip?;
                continue;
            }
            let closing = rest.get(1) == Some(&b'/');
            let name_start = lt + 1 + closing as usize;
            let gt = tag_end(buf, name_start)?;
            let name_end = buf[name_start..gt]
                .iter()
                .position(|&b| is_space(b) || b == b'/')
                .map_or(gt, |p| name_start + p);
            let self_closing = !closing && gt > name_start && buf[gt - 1] == b'/';
            let attrs_end = if self_closing { gt - 1 } else { gt };
            self.pos = gt + 1;
            return Some(Tag {
                name: &buf[name_start..name_end],
                closing,
                self_closing,
                attrs: &buf[name_end.min(attrs_end)..attrs_end],
                offset: lt,
            });
        }
    }
}

/// For `<!…>` / `<?…>` constructs returns `Some(length)` (or `Some(None)`
/// when truncated); `None` for ordinary tags.
pub(crate) fn markup_len(rest: &[u8]) -> Option<Option<usize>> {
    let terminator: &[u8] = if rest.starts_with(b"<!--") {
        b"-->"
    } else if rest.starts_with(b"<![CDATA[") {
        b"]]>"
    } else if rest.starts_with(b"<?") {
        b"?>"
    } else if rest.starts_with(b"<!") {
        b">"
    } else {
        return None;
    };
    let from = 2;
    Some(memmem::find(&rest[from..], terminator).map(|p| from + p + terminator.len()))
}

/// Index of the `>` closing the tag whose name starts at `from`, honoring
/// quoted attribute values.
pub(crate) fn tag_end(buf: &[u8], from: usize) -> Option<usize> {
    let mut quote = 0u8;
    for (i, &b) in buf.iter().enumerate().skip(from) {
        if quote != 0 {
            if b == quote {
                quote = 0;
            }
        } else if b == b'"' || b == b'\'' {
            quote = b;
        } else if b == b'>' {
            return Some(i);
        }
    }
    None
}

/// Offsets of every `<` in the buffer; convenience for tests and probes.
pub fn lt_positions(buf: &[u8]) -> impl Iterator<Item = usize> + '_ {
    memchr_iter(b'<', buf)
}
