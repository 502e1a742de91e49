//! Chunk anchors, positional prescan and tail-based extent discovery.
//!
//! Markup characters inside content are always escaped, so every raw `<` in a
//! worksheet starts a tag. A chunk starting at an arbitrary byte therefore
//! begins parsing at its first `sheetData`, `row` or `c` tag; whatever lies
//! before belongs to the previous chunk's last cell.

use memchr::{memchr, memrchr};

use super::names::{Element, ElementMatcher};
use super::refs::{parse_cell_ref, push_decimal};
use super::tags::{markup_len, tag_end, Tag};
use super::{is_space, ScanError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorKind {
    SheetDataOpen,
    SheetDataClose,
    Row,
    Cell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Anchor {
    /// Offset of the anchor tag's `<` within the window.
    pub offset: usize,
    pub kind: AnchorKind,
}

/// Finds the first structural tag in `window`.
///
/// Fails with [`ScanError::NoAnchorFound`] when the window holds no complete
/// anchor name; the caller has to extend the window.
pub fn resolve_chunk_start(window: &[u8]) -> Result<Anchor, ScanError> {
    let mut matcher = ElementMatcher::elements();
    let mut pos = 0;
    while let Some(k) = memchr(b'<', &window[pos..]) {
        let lt = pos + k;
        let rest = &window[lt..];
        match markup_len(rest) {
            Some(Some(len)) => {
                pos = lt + len;
                continue;
            }
            Some(None) => break,
            None => {}
        }
        let closing = rest.get(1) == Some(&b'/');
        let name_start = 1 + closing as usize;
        matcher.start(if closing {
            Element::SheetData.bit()
        } else {
            Element::SheetData.bit() | Element::Row.bit() | Element::C.bit()
        });
        let mut terminated = false;
        for &b in &rest[name_start.min(rest.len())..] {
            if is_space(b) || b == b'>' || b == b'/' {
                terminated = true;
                break;
            }
            matcher.push(b);
        }
        if !terminated {
            break;
        }
        let kind = match (matcher.element(), closing) {
            (Some(Element::SheetData), false) => Some(AnchorKind::SheetDataOpen),
            (Some(Element::SheetData), true) => Some(AnchorKind::SheetDataClose),
            (Some(Element::Row), _) => Some(AnchorKind::Row),
            (Some(Element::C), _) => Some(AnchorKind::Cell),
            _ => None,
        };
        if let Some(kind) = kind {
            return Ok(Anchor { offset: lt, kind });
        }
        pos = lt + 1;
    }
    Err(ScanError::NoAnchorFound)
}

/// Where a chunk starts parsing and the positional state at that point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkPosition {
    /// Absolute document offset of the anchor tag.
    pub offset: usize,
    pub kind: AnchorKind,
    /// Last row opened before the anchor (0 before the first row).
    pub row: u32,
    /// Column of the last cell of that row before the anchor (0 if none).
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prescan {
    /// One entry per chunk start; `None` when the chunk holds no anchor.
    pub positions: Vec<Option<ChunkPosition>>,
    /// Rows and widest row seen in the whole document.
    pub rows: u32,
    pub cols: u32,
}

/// Reduced sequential pass counting `row` and `c` opens, yielding the row and
/// column reached at each chunk's anchor so chunks can be parsed
/// positionally when cells carry no `r` attribute.
pub fn prescan_positions(doc: &[u8], chunk_starts: &[usize]) -> Result<Prescan, ScanError> {
    let anchors: Vec<Option<Anchor>> = chunk_starts
        .iter()
        .map(|&s| match resolve_chunk_start(&doc[s.min(doc.len())..]) {
            Ok(a) => Some(Anchor {
                offset: s + a.offset,
                kind: a.kind,
            }),
            Err(_) => None,
        })
        .collect();
    let mut order: Vec<usize> = (0..anchors.len()).filter(|&i| anchors[i].is_some()).collect();
    order.sort_by_key(|&i| anchors[i].map(|a| a.offset));
    let mut positions = vec![None; anchors.len()];
    let mut next = 0;

    let mut row = 0u32;
    let mut col = 0u32;
    let mut max_col = 0u32;
    let mut in_data = false;
    let mut pos = 0;
    let mut record = |offset: usize, row: u32, col: u32, next: &mut usize| {
        while *next < order.len() {
            let i = order[*next];
            let a = anchors[i].expect("ordered anchors exist");
            if a.offset > offset {
                break;
            }
            positions[i] = Some(ChunkPosition {
                offset: a.offset,
                kind: a.kind,
                row,
                col,
            });
            *next += 1;
        }
    };
    while let Some(k) = memchr(b'<', &doc[pos..]) {
        let lt = pos + k;
        record(lt, row, col, &mut next);
        let rest = &doc[lt..];
        if let Some(len) = markup_len(rest) {
            pos = len.map_or(doc.len(), |l| lt + l);
            continue;
        }
        let closing = rest.get(1) == Some(&b'/');
        let name_start = lt + 1 + closing as usize;
        let name_len = doc[name_start..]
            .iter()
            .position(|&b| is_space(b) || b == b'>' || b == b'/')
            .unwrap_or(doc.len() - name_start);
        let name = &doc[name_start..name_start + name_len];
        pos = lt + 1;
        match (closing, name) {
            (false, b"sheetData") => {
                in_data = true;
                row = 0;
            }
            (true, b"sheetData") => break,
            (false, b"row") if in_data => {
                let tag_stop = tag_end(doc, name_start).unwrap_or(doc.len());
                let attrs = &doc[name_start + name_len..tag_stop];
                row = match attr_value(attrs, b"r") {
                    Some(r) => r.iter().try_fold(0, |acc, &b| {
                        if b.is_ascii_digit() {
                            push_decimal(acc, b)
                        } else {
                            Err(ScanError::MalformedRef(String::from_utf8_lossy(r).into_owned()))
                        }
                    })?,
                    None => row + 1,
                };
                col = 0;
                pos = tag_stop;
            }
            (false, b"c") if in_data => {
                let tag_stop = tag_end(doc, name_start).unwrap_or(doc.len());
                let attrs = &doc[name_start + name_len..tag_stop];
                match attr_value(attrs, b"r") {
                    Some(r) => (row, col) = parse_cell_ref(r)?,
                    None => col += 1,
                }
                max_col = max_col.max(col);
                pos = tag_stop;
            }
            _ => {}
        }
    }
    record(usize::MAX, row, col, &mut next);
    Ok(Prescan {
        positions,
        rows: row,
        cols: max_col,
    })
}

fn attr_value<'a>(attrs: &'a [u8], name: &[u8]) -> Option<&'a [u8]> {
    let tag = Tag {
        name: b"",
        closing: false,
        self_closing: false,
        attrs,
        offset: 0,
    };
    tag.attributes().find(|(n, _)| *n == name).map(|(_, v)| v)
}

/// Extent bound from the end of a worksheet: the row of the last cell and
/// the largest column in that last row. `None` when the last cell has no
/// `r` attribute or there are no cells.
pub fn tail_extent(doc: &[u8]) -> Option<(u32, u32)> {
    let mut end = doc.len();
    let mut last_row = None;
    let mut max_col = 0;
    while let Some(lt) = memrchr(b'<', &doc[..end]) {
        end = lt;
        let rest = &doc[lt + 1..];
        let name_len = rest
            .iter()
            .position(|&b| is_space(b) || b == b'>' || b == b'/')
            .unwrap_or(rest.len());
        match &rest[..name_len] {
            b"c" => {
                let stop = tag_end(doc, lt + 1).unwrap_or(doc.len());
                let (row, col) = parse_cell_ref(attr_value(&doc[lt + 1 + name_len..stop], b"r")?).ok()?;
                match last_row {
                    None => last_row = Some(row),
                    Some(r) if r != row => break,
                    _ => {}
                }
                max_col = max_col.max(col);
            }
            b"row" | b"sheetData" if last_row.is_some() => break,
            b"sheetData" => return None,
            _ => {}
        }
    }
    last_row.map(|r| (r, max_col))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_mid_value() {
        let w = b"42</v></c><c r=\"B2\"><v>1</v></c>";
        let a = resolve_chunk_start(w).unwrap();
        assert_eq!(a.kind, AnchorKind::Cell);
        assert_eq!(&w[a.offset..a.offset + 8], b"<c r=\"B2");
    }

    #[test]
    fn anchor_at_row() {
        let w = b"<row r=\"7\"><c r=\"A7\"/></row>";
        assert_eq!(
            resolve_chunk_start(w).unwrap(),
            Anchor {
                offset: 0,
                kind: AnchorKind::Row
            }
        );
    }

    #[test]
    fn anchor_after_long_attribute_text() {
        let mut w = b"ab".repeat(500);
        w.extend_from_slice(b"\" ht=\"3\"><c r=\"A9\"><v>1</v></c>");
        let a = resolve_chunk_start(&w).unwrap();
        assert_eq!(a.offset, 1000 + 9);
        assert_eq!(a.kind, AnchorKind::Cell);
    }

    #[test]
    fn no_anchor() {
        assert_eq!(resolve_chunk_start(b"plain text"), Err(ScanError::NoAnchorFound));
        assert_eq!(resolve_chunk_start(b"</v></c><co"), Err(ScanError::NoAnchorFound));
        assert_eq!(resolve_chunk_start(b"<!-- <row> "), Err(ScanError::NoAnchorFound));
        assert_eq!(
            resolve_chunk_start(b"<col min=\"1\"/><cols></cols></sheetData>").unwrap().kind,
            AnchorKind::SheetDataClose
        );
    }

    #[test]
    fn prescan_counts_positions() {
        let doc = b"<worksheet><sheetData><row><c><v>1</v></c><c/></row><row><c><v>2</v></c><c><v>3</v></c></row></sheetData></worksheet>";
        let second_row = doc.windows(5).position(|w| w == b"</row").unwrap() + 2;
        let third_cell = doc.windows(3).position(|w| w == b"<v>").unwrap() + 1;
        let pre = prescan_positions(doc, &[0, second_row, third_cell, doc.len()]).unwrap();
        assert_eq!(pre.rows, 2);
        assert_eq!(pre.cols, 2);
        let p0 = pre.positions[0].unwrap();
        assert_eq!((p0.kind, p0.row, p0.col), (AnchorKind::SheetDataOpen, 0, 0));
        let p1 = pre.positions[1].unwrap();
        assert_eq!((p1.kind, p1.row, p1.col), (AnchorKind::Row, 1, 2));
        let p2 = pre.positions[2].unwrap();
        assert_eq!((p2.kind, p2.row, p2.col), (AnchorKind::Cell, 1, 1));
        assert!(pre.positions[3].is_none());
    }

    #[test]
    fn tail_extent_reads_last_row() {
        let doc = b"<sheetData><row r=\"1\"><c r=\"A1\"/><c r=\"D1\"/></row><row r=\"9\"><c r=\"B9\"/><c r=\"C9\"/></row></sheetData>";
        assert_eq!(tail_extent(doc), Some((9, 3)));
        assert_eq!(tail_extent(b"<sheetData/>"), None);
        assert_eq!(tail_extent(b"<sheetData><row><c><v>1</v></c></row></sheetData>"), None);
    }
}
