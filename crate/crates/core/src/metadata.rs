//! Workbook metadata: the OPC relationship graph, sheet list, and the
//! pre-allocation hints found in part headers (sheet dimension, shared
//! string count, date styles).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::scan::tags::{Tag, Tags};
use crate::scan::{announced_count, parse_cell_ref};

/// Bytes read from the head of a part when probing for header elements.
const PROBE_WINDOW: usize = 32 * 1024;

pub const REL_OFFICE_DOCUMENT: &str = "officeDocument";
pub const REL_WORKSHEET: &str = "worksheet";
pub const REL_SHARED_STRINGS: &str = "sharedStrings";
pub const REL_STYLES: &str = "styles";

/// A sheet as listed by the workbook part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheetInfo {
    pub name: String,
    pub relationship_id: String,
    /// Archive path of the worksheet part.
    pub path: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkbookMeta {
    /// In workbook order.
    pub sheets: Vec<SheetInfo>,
    pub shared_strings_path: Option<String>,
    pub shared_strings_unique_count: Option<u32>,
    pub styles_path: Option<String>,
}

/// Populated extent declared by a `<dimension>` element (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SheetDimension {
    pub rows: u32,
    pub cols: u32,
}

/// Sheet choice: a name, or a 1-based position in workbook order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SheetSelector {
    Name(String),
    Index(usize),
}

impl Default for SheetSelector {
    fn default() -> Self {
        SheetSelector::Index(1)
    }
}

impl fmt::Display for SheetSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SheetSelector::Name(n) => f.write_str(n),
            SheetSelector::Index(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for SheetSelector {
    type Err = std::convert::Infallible;

    /// Text is a name; numeric text is still tried as a name first when
    /// selecting (see [`WorkbookMeta::select`]).
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(SheetSelector::Name(s.to_string()))
    }
}

impl From<usize> for SheetSelector {
    fn from(i: usize) -> Self {
        SheetSelector::Index(i)
    }
}

impl From<&str> for SheetSelector {
    fn from(s: &str) -> Self {
        SheetSelector::Name(s.to_string())
    }
}

impl WorkbookMeta {
    /// Picks a sheet: exact name, then case-insensitive name, then (for
    /// numeric text) 1-based index.
    pub fn select(&self, selector: &SheetSelector) -> Result<&SheetInfo> {
        let by_index = |i: usize| i.checked_sub(1).and_then(|i| self.sheets.get(i));
        let found = match selector {
            SheetSelector::Index(i) => by_index(*i),
            SheetSelector::Name(n) => self
                .sheets
                .iter()
                .find(|s| s.name == *n)
                .or_else(|| self.sheets.iter().find(|s| s.name.to_lowercase() == n.to_lowercase()))
                .or_else(|| n.trim().parse().ok().and_then(by_index)),
        };
        found.ok_or_else(|| Error::NoSuchSheet(selector.to_string()))
    }
}

/// Relationship part that describes `part` (`xl/workbook.xml` →
/// `xl/_rels/workbook.xml.rels`).
pub fn rels_path_for(part: &str) -> String {
    match part.rfind('/') {
        Some(p) => format!("{}/_rels/{}.rels", &part[..p], &part[p + 1..]),
        None => format!("_rels/{part}.rels"),
    }
}

/// Resolves a relationship target against the folder of its source part.
/// Absolute targets (`/xl/x.xml`) are taken from the archive root.
pub fn resolve_target(source_part: &str, target: &str) -> String {
    let mut segments: Vec<&str> = Vec::new();
    let rel = match target.strip_prefix('/') {
        Some(abs) => abs,
        None => {
            if let Some(p) = source_part.rfind('/') {
                segments.extend(source_part[..p].split('/').filter(|s| !s.is_empty()));
            }
            target
        }
    };
    for seg in rel.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                segments.pop();
            }
            s => segments.push(s),
        }
    }
    segments.join("/")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relationship {
    pub id: String,
    /// Last segment of the type URI (`officeDocument`, `worksheet`, …), which
    /// is shared by the transitional and strict namespaces.
    pub kind: String,
    /// Resolved archive path.
    pub target: String,
    pub external: bool,
}

/// Parses the relationship part describing `source_part` (empty string for
/// the package root).
pub fn read_relationships(a: &Archive, source_part: &str) -> Result<Option<Vec<Relationship>>> {
    let rels = if source_part.is_empty() {
        "_rels/.rels".to_string()
    } else {
        rels_path_for(source_part)
    };
    if a.entry(&rels).is_none() {
        return Ok(None);
    }
    let xml = a.read_entry_full(&rels)?;
    let mut out = Vec::new();
    for tag in Tags::new(&xml) {
        if tag.closing || tag.local_name() != b"Relationship" {
            continue;
        }
        let field = |name: &[u8]| tag.attr(name).map(|v| String::from_utf8_lossy(&v).into_owned());
        let (Some(id), Some(ty), Some(target)) = (field(b"Id"), field(b"Type"), field(b"Target")) else {
            return Err(Error::MalformedRels {
                part: rels,
                reason: "relationship lacks Id, Type or Target".into(),
            });
        };
        let external = field(b"TargetMode").is_some_and(|m| m == "External");
        let kind = ty.rsplit('/').next().unwrap_or_default().to_string();
        let target = if external {
            target
        } else {
            resolve_target(source_part, &target)
        };
        out.push(Relationship {
            id,
            kind,
            target,
            external,
        });
    }
    Ok(Some(out))
}

/// Relationship kind → target path for the package root.
pub fn read_root_relationships(a: &Archive) -> Result<HashMap<String, String>> {
    let rels = read_relationships(a, "")?.ok_or(Error::MissingRels)?;
    let mut map = HashMap::new();
    for r in rels.into_iter().filter(|r| !r.external) {
        map.entry(r.kind).or_insert(r.target);
    }
    if !map.contains_key(REL_OFFICE_DOCUMENT) {
        return Err(Error::MalformedRels {
            part: "_rels/.rels".into(),
            reason: "no officeDocument relationship".into(),
        });
    }
    Ok(map)
}

/// Reads the workbook part and resolves its sheets and auxiliary parts.
pub fn read_workbook(a: &Archive, workbook_path: &str) -> Result<WorkbookMeta> {
    let rels = read_relationships(a, workbook_path)?.ok_or_else(|| {
        Error::MalformedWorkbook(format!("missing relationship part {}", rels_path_for(workbook_path)))
    })?;
    let by_id: HashMap<&str, &Relationship> = rels.iter().map(|r| (r.id.as_str(), r)).collect();
    let xml = a.read_entry_full(workbook_path)?;
    let mut meta = WorkbookMeta::default();
    let mut in_sheets = false;
    for tag in Tags::new(&xml) {
        match (tag.local_name(), tag.closing) {
            (b"sheets", false) => in_sheets = !tag.self_closing,
            (b"sheets", true) => in_sheets = false,
            (b"sheet", false) if in_sheets => meta.sheets.push(sheet_entry(a, &tag, &by_id)?),
            _ => {}
        }
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = meta.sheets.iter().find(|s| !seen.insert(s.name.as_str())) {
        return Err(Error::MalformedWorkbook(format!("duplicate sheet name {}", dup.name)));
    }
    let find = |kind: &str| {
        rels.iter()
            .find(|r| r.kind == kind && !r.external && a.entry(&r.target).is_some())
            .map(|r| r.target.clone())
    };
    meta.shared_strings_path = find(REL_SHARED_STRINGS);
    meta.styles_path = find(REL_STYLES);
    if let Some(p) = &meta.shared_strings_path {
        meta.shared_strings_unique_count = probe_sst_count(a, p)?;
    }
    Ok(meta)
}

fn sheet_entry(a: &Archive, tag: &Tag<'_>, rels: &HashMap<&str, &Relationship>) -> Result<SheetInfo> {
    let text = |v: std::borrow::Cow<'_, [u8]>| String::from_utf8_lossy(&v).into_owned();
    let name = tag
        .attr(b"name")
        .map(text)
        .ok_or_else(|| Error::MalformedWorkbook("sheet without a name".into()))?;
    // The relationship id lives in the officeDocument relationships
    // namespace, conventionally prefixed `r:`.
    let id = tag
        .attributes()
        .find(|(n, _)| n.ends_with(b":id") || *n == b"id")
        .map(|(_, v)| text(crate::scan::tags::unescape(v)))
        .ok_or_else(|| Error::MalformedWorkbook(format!("sheet {name} has no relationship id")))?;
    let rel = rels
        .get(id.as_str())
        .ok_or_else(|| Error::MalformedWorkbook(format!("sheet {name} refers to unknown relationship {id}")))?;
    if a.entry(&rel.target).is_none() {
        return Err(Error::MalformedWorkbook(format!(
            "sheet {name} points to missing part {}",
            rel.target
        )));
    }
    Ok(SheetInfo {
        name,
        relationship_id: id,
        path: rel.target.clone(),
    })
}

/// Locates the workbook via the root relationships and reads it.
pub fn read_metadata(a: &Archive) -> Result<WorkbookMeta> {
    let root = read_root_relationships(a)?;
    read_workbook(a, &root[REL_OFFICE_DOCUMENT])
}

/// First `max` bytes of an entry, streamed so large parts stay compressed.
fn head(a: &Archive, path: &str, max: usize) -> Result<Vec<u8>> {
    let mut s = a.open_entry_stream(path)?;
    if s.is_finished() {
        return Ok(Vec::new());
    }
    let mut buf = vec![0; max];
    let (n, _) = s.next_chunk(&mut buf)?;
    buf.truncate(n);
    Ok(buf)
}

/// Extent declared by the worksheet's `<dimension ref="…">`, read from the
/// head of the part. Single-cell refs (`ref="A1"`) are treated as absent
/// because writers emit them for sheets of any size.
pub fn probe_dimension(a: &Archive, sheet_path: &str) -> Result<Option<SheetDimension>> {
    let head = head(a, sheet_path, PROBE_WINDOW)?;
    Ok(dimension_in(&head))
}

pub(crate) fn dimension_in(head: &[u8]) -> Option<SheetDimension> {
    for tag in Tags::new(head) {
        match tag.local_name() {
            b"dimension" if !tag.closing => return tag.attr(b"ref").and_then(|r| parse_dimension(&r)),
            b"sheetData" => return None,
            _ => {}
        }
    }
    None
}

/// What the head of a worksheet part reveals before parsing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SheetHead {
    pub dimension: Option<SheetDimension>,
    /// Whether the first cell carries an `r` attribute; `None` when the
    /// head holds no cell.
    pub cells_have_refs: Option<bool>,
}

pub fn probe_head(a: &Archive, sheet_path: &str) -> Result<SheetHead> {
    let head = head(a, sheet_path, PROBE_WINDOW)?;
    Ok(SheetHead {
        dimension: dimension_in(&head),
        cells_have_refs: first_cell_has_ref(&head),
    })
}

/// Whether the first `<c>` tag in `doc` has an `r` attribute.
pub fn first_cell_has_ref(doc: &[u8]) -> Option<bool> {
    Tags::new(doc)
        .find(|t| !t.closing && t.local_name() == b"c")
        .map(|t| t.attributes().any(|(n, _)| n == b"r"))
}

/// Parses the end of a range reference (`A1:CV600000` → 600000 × 100).
pub fn parse_dimension(range: &[u8]) -> Option<SheetDimension> {
    let colon = range.iter().position(|&b| b == b':')?;
    let end: Vec<u8> = range[colon + 1..].iter().copied().filter(|&b| b != b'$').collect();
    let (rows, cols) = parse_cell_ref(&end).ok()?;
    Some(SheetDimension { rows, cols })
}

/// Announced size of the shared-strings table (`uniqueCount`, else `count`).
pub fn probe_sst_count(a: &Archive, sst_path: &str) -> Result<Option<u32>> {
    let head = head(a, sst_path, PROBE_WINDOW)?;
    Ok(announced_count(&head))
}

/// Built-in number formats that render as dates or times.
pub fn is_date_format(num_fmt_id: u32) -> bool {
    matches!(num_fmt_id, 14..=22 | 45..=47)
}

/// Per-style flags marking the cell formats (`cellXfs` entries) that use a
/// built-in date format. Custom format strings are not interpreted.
pub fn read_date_styles(a: &Archive, styles_path: &str) -> Result<Arc<[bool]>> {
    let xml = a.read_entry_full(styles_path)?;
    Ok(date_styles_in(&xml))
}

pub(crate) fn date_styles_in(xml: &[u8]) -> Arc<[bool]> {
    let mut flags = Vec::new();
    let mut in_cell_xfs = false;
    for tag in Tags::new(xml) {
        match (tag.local_name(), tag.closing) {
            (b"cellXfs", false) => in_cell_xfs = !tag.self_closing,
            (b"cellXfs", true) => in_cell_xfs = false,
            (b"xf", false) if in_cell_xfs => {
                let id = tag
                    .attr(b"numFmtId")
                    .and_then(|v| std::str::from_utf8(&v).ok()?.trim().parse().ok())
                    .unwrap_or(0);
                flags.push(is_date_format(id));
            }
            _ => {}
        }
    }
    flags.into()
}
