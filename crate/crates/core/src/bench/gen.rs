//! Deterministic synthetic workbooks with retained ground truth.
//!
//! Every column draws from its own generator seeded by `(seed, column)`, one
//! cell per row in row order, so a file with fewer rows holds a prefix of
//! the data of a larger one. Text cells pick either a fresh string id or a
//! uniformly chosen earlier one; a string is a pure function of
//! `(seed, column, id)`.

use std::fs::File;
use std::io::{self, BufWriter, Seek, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::distributions::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::zipwrite::{EntryMethod, ZipWriter};
use crate::scan::column_name;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ColumnKind {
    Float,
    Integer,
    /// `unique` is the chance that a cell introduces a new string.
    Text { unique: f64 },
    Boolean,
    Date,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    #[serde(flatten)]
    pub kind: ColumnKind,
    #[serde(default)]
    pub blank: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StringStorage {
    #[default]
    Shared,
    Inline,
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

fn level() -> u32 {
    6
}

/// What to generate. Accepted as JSON, e.g.
/// `{"rows": 10, "columns": [{"type": "text", "unique": 0.5, "blank": 0.1}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub rows: u32,
    pub columns: Vec<ColumnSpec>,
    #[serde(default = "yes")]
    pub emit_refs: bool,
    #[serde(default = "yes")]
    pub emit_dimension: bool,
    #[serde(default)]
    pub strings: StringStorage,
    #[serde(default)]
    pub seed: u64,
    /// Sheet `i` (0-based) uses seed `seed + i`.
    #[serde(default = "one")]
    pub sheets: u32,
    /// Deflate level of the worksheet entries.
    #[serde(default = "level")]
    pub level: u32,
}

impl GenSpec {
    pub fn new(rows: u32, columns: Vec<ColumnSpec>) -> Self {
        GenSpec {
            rows,
            columns,
            emit_refs: true,
            emit_dimension: true,
            strings: StringStorage::Shared,
            seed: 0,
            sheets: 1,
            level: 6,
        }
    }

    pub fn uniform(rows: u32, cols: usize, kind: ColumnKind) -> Self {
        GenSpec::new(rows, vec![ColumnSpec { kind, blank: 0.0 }; cols])
    }

    pub fn numeric(rows: u32, cols: usize) -> Self {
        let columns = (0..cols)
            .map(|i| ColumnSpec {
                kind: if i % 2 == 0 { ColumnKind::Float } else { ColumnKind::Integer },
                blank: 0.0,
            })
            .collect();
        GenSpec::new(rows, columns)
    }

    /// 40 float, 30 integer, 20 text (25% unique) and 10 text (75% unique)
    /// columns.
    pub fn mixed(rows: u32) -> Self {
        let mut columns = Vec::with_capacity(100);
        let mut add = |n: usize, kind: ColumnKind| columns.extend(std::iter::repeat_n(ColumnSpec { kind, blank: 0.0 }, n));
        add(40, ColumnKind::Float);
        add(30, ColumnKind::Integer);
        add(20, ColumnKind::Text { unique: 0.25 });
        add(10, ColumnKind::Text { unique: 0.75 });
        GenSpec::new(rows, columns)
    }

    pub fn blank(mut self, fraction: f64) -> Self {
        for c in &mut self.columns {
            c.blank = fraction;
        }
        self
    }

    pub fn refs(mut self, on: bool) -> Self {
        self.emit_refs = on;
        self
    }

    pub fn dimension(mut self, on: bool) -> Self {
        self.emit_dimension = on;
        self
    }

    pub fn inline_strings(mut self, on: bool) -> Self {
        self.strings = if on { StringStorage::Inline } else { StringStorage::Shared };
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sheets(mut self, n: u32) -> Self {
        self.sheets = n;
        self
    }

    pub fn level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }

    pub fn validate(&self) -> io::Result<()> {
        let bad = |m: String| Err(io::Error::new(io::ErrorKind::InvalidInput, m));
        for (i, c) in self.columns.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.blank) {
                return bad(format!("column {i}: blank fraction {} outside [0, 1]", c.blank));
            }
            if let ColumnKind::Text { unique } = c.kind {
                if !(0.0..=1.0).contains(&unique) {
                    return bad(format!("column {i}: unique fraction {unique} outside [0, 1]"));
                }
            }
        }
        if self.sheets == 0 {
            return bad("at least one sheet is required".into());
        }
        if self.level > 9 {
            return bad(format!("deflate level {} above 9", self.level));
        }
        Ok(())
    }

    fn uses_sst(&self) -> bool {
        self.strings == StringStorage::Shared && self.columns.iter().any(|c| matches!(c.kind, ColumnKind::Text { .. }))
    }
}

/// One generated cell value.
#[derive(Clone, Debug, PartialEq)]
pub enum TruthValue {
    Float(f64),
    Integer(i64),
    /// `(column-local string id)`
    Text(u32),
    Boolean(bool),
    /// Whole days since 1899-12-30.
    Date(i64),
}

/// Per-column aggregates of the first sheet, for checks that do not need
/// the CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnTruth {
    pub non_blank: u64,
    /// Sum of numeric values (dates as serials, booleans as 0/1).
    pub sum: f64,
    /// Distinct strings used by a text column.
    pub distinct: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub rows: u32,
    pub cols: u32,
    pub columns: Vec<ColumnTruth>,
    /// Uncompressed size of the first worksheet.
    pub sheet_bytes: u64,
    /// Compressed size of the first worksheet.
    pub sheet_compressed_bytes: u64,
    pub shared_strings: u32,
}

/// Day zero of serial dates.
fn date_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1899, 12, 30).expect("valid date")
}

/// Serial range 2000-01-01 ..= 2029-12-31.
const DATE_RANGE: std::ops::RangeInclusive<i64> = 36526..=47483;

fn column_seed(seed: u64, col: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (col as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// The text of string `id` of column `col`.
pub fn text_value(seed: u64, col: usize, id: u32) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(column_seed(seed, col) ^ (u64::from(id) << 20).wrapping_add(0x5851_F42D));
    let len = rng.gen_range(8..=24);
    (0..len).map(|_| rng.sample(Alphanumeric) as char).collect()
}

/// Cell stream of one column.
struct ColumnGen {
    spec: ColumnSpec,
    rng: ChaCha8Rng,
    ids: u32,
}

impl ColumnGen {
    fn new(seed: u64, col: usize, spec: ColumnSpec) -> Self {
        ColumnGen {
            spec,
            rng: ChaCha8Rng::seed_from_u64(column_seed(seed, col)),
            ids: 0,
        }
    }

    fn next(&mut self) -> Option<TruthValue> {
        let r = &mut self.rng;
        if self.spec.blank > 0.0 && r.gen_bool(self.spec.blank) {
            return None;
        }
        Some(match self.spec.kind {
            ColumnKind::Float => {
                let v: f64 = r.gen_range(-1.0e6..1.0e6);
                let scale = 10f64.powi(r.gen_range(0..=4));
                let v = (v * scale).round() / scale;
                // `-0` would come back as the integer 0.
                TruthValue::Float(if v == 0.0 { 0.0 } else { v })
            }
            ColumnKind::Integer => TruthValue::Integer(r.gen_range(-1_000_000_000..=1_000_000_000)),
            ColumnKind::Text { unique } => {
                let id = if self.ids == 0 || r.gen_bool(unique) {
                    self.ids += 1;
                    self.ids - 1
                } else {
                    r.gen_range(0..self.ids)
                };
                TruthValue::Text(id)
            }
            ColumnKind::Boolean => TruthValue::Boolean(r.gen_bool(0.5)),
            ColumnKind::Date => TruthValue::Date(r.gen_range(DATE_RANGE)),
        })
    }
}

/// Renders `value` the way a loaded frame prints it.
pub fn truth_text(value: &TruthValue, seed: u64, col: usize) -> String {
    match value {
        TruthValue::Float(v) => format!("{v}"),
        TruthValue::Integer(v) => v.to_string(),
        TruthValue::Text(id) => text_value(seed, col, *id),
        TruthValue::Boolean(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        TruthValue::Date(d) => (date_epoch() + Duration::days(*d)).format("%Y-%m-%d").to_string(),
    }
}

/// Optional byproducts of [`generate`].
#[derive(Default)]
pub struct Outputs<'a> {
    /// Ground-truth CSV of the first sheet.
    pub csv: Option<&'a mut dyn Write>,
    /// Copy of the first sheet's XML before compression.
    pub sheet_xml: Option<&'a mut dyn Write>,
}

/// Writes the workbook described by `spec` to `out`.
pub fn generate<W: Write + Seek>(spec: &GenSpec, out: W, mut extra: Outputs<'_>) -> io::Result<(W, GenSummary)> {
    spec.validate()?;
    let shared = spec.uses_sst();
    // First pass: string ids per text column, so shared indexes are known.
    let mut bases = vec![vec![0u32; spec.columns.len()]; spec.sheets as usize];
    let mut counts = bases.clone();
    let mut next_base = 0u32;
    if shared {
        for (s, sheet_bases) in bases.iter_mut().enumerate() {
            let seed = spec.seed.wrapping_add(s as u64);
            for (c, col) in spec.columns.iter().enumerate() {
                if let ColumnKind::Text { .. } = col.kind {
                    let mut g = ColumnGen::new(seed, c, *col);
                    for _ in 0..spec.rows {
                        g.next();
                    }
                    sheet_bases[c] = next_base;
                    counts[s][c] = g.ids;
                    next_base += g.ids;
                }
            }
        }
    }

    let mut zip = ZipWriter::new(out);
    let method = EntryMethod::DeflateLevel(spec.level);
    put(&mut zip, "[Content_Types].xml", &content_types(spec, shared))?;
    put(&mut zip, "_rels/.rels", ROOT_RELS)?;
    put(&mut zip, "xl/workbook.xml", &workbook_xml(spec))?;
    put(&mut zip, "xl/_rels/workbook.xml.rels", &workbook_rels(spec, shared))?;
    put(&mut zip, "xl/styles.xml", STYLES)?;

    let mut summary = GenSummary {
        rows: spec.rows,
        cols: spec.columns.len() as u32,
        shared_strings: next_base,
        ..Default::default()
    };
    for s in 0..spec.sheets as usize {
        let name = format!("xl/worksheets/sheet{}.xml", s + 1);
        let entry = zip.start_entry(&name, method)?;
        let mut w = BufWriter::with_capacity(1 << 16, Tee::new(entry, if s == 0 { extra.sheet_xml.take() } else { None }));
        let csv = if s == 0 { extra.csv.take() } else { None };
        let columns = write_sheet(spec, spec.seed.wrapping_add(s as u64), &bases[s], shared, &mut w, csv)?;
        let tee = w.into_inner().map_err(|e| e.into_error())?;
        let bytes = tee.written;
        tee.inner.finish()?;
        if s == 0 {
            summary.columns = columns;
            summary.sheet_bytes = bytes;
        }
    }
    if shared {
        let entry = zip.start_entry("xl/sharedStrings.xml", method)?;
        let mut w = BufWriter::with_capacity(1 << 16, entry);
        write!(
            w,
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<sst xmlns=\"{NS_MAIN}\" count=\"{next_base}\" uniqueCount=\"{next_base}\">"
        )?;
        for (s, sheet_counts) in counts.iter().enumerate() {
            let seed = spec.seed.wrapping_add(s as u64);
            for (c, &n) in sheet_counts.iter().enumerate() {
                for id in 0..n {
                    write!(w, "<si><t>{}</t></si>", text_value(seed, c, id))?;
                }
            }
        }
        w.write_all(b"</sst>")?;
        w.into_inner().map_err(|e| e.into_error())?.finish()?;
    }
    let out = zip.finish()?;
    Ok((out, summary))
}

fn write_sheet(
    spec: &GenSpec,
    seed: u64,
    bases: &[u32],
    shared: bool,
    w: &mut impl Write,
    mut csv: Option<&mut dyn Write>,
) -> io::Result<Vec<ColumnTruth>> {
    let cols = spec.columns.len();
    let mut gens: Vec<ColumnGen> = spec.columns.iter().enumerate().map(|(c, s)| ColumnGen::new(seed, c, *s)).collect();
    let names: Vec<String> = (1..=cols as u32).map(column_name).collect();
    let mut truth = vec![ColumnTruth::default(); cols];
    let mut csv = csv.as_mut().map(|w| csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(w));
    let mut record: Vec<String> = vec![String::new(); cols];

    write!(w, "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<worksheet xmlns=\"{NS_MAIN}\" xmlns:r=\"{NS_REL}\">")?;
    if spec.emit_dimension {
        if spec.rows == 0 || cols == 0 {
            w.write_all(b"<dimension ref=\"A1\"/>")?;
        } else {
            write!(w, "<dimension ref=\"A1:{}{}\"/>", names[cols - 1], spec.rows)?;
        }
    }
    w.write_all(b"<sheetData>")?;
    let omit_blanks = spec.emit_refs && spec.emit_dimension;
    for row in 1..=spec.rows {
        if spec.emit_refs {
            write!(w, "<row r=\"{row}\">")?;
        } else {
            w.write_all(b"<row>")?;
        }
        for (c, g) in gens.iter_mut().enumerate() {
            let value = g.next();
            record[c].clear();
            let Some(value) = value else {
                if !omit_blanks {
                    if spec.emit_refs {
                        write!(w, "<c r=\"{}{row}\"/>", names[c])?;
                    } else {
                        w.write_all(b"<c/>")?;
                    }
                }
                continue;
            };
            let t = &mut truth[c];
            t.non_blank += 1;
            let r = if spec.emit_refs {
                format!(" r=\"{}{row}\"", names[c])
            } else {
                String::new()
            };
            match value {
                TruthValue::Float(v) => {
                    t.sum += v;
                    write!(w, "<c{r}><v>{v}</v></c>")?;
                }
                TruthValue::Integer(v) => {
                    t.sum += v as f64;
                    write!(w, "<c{r}><v>{v}</v></c>")?;
                }
                TruthValue::Boolean(b) => {
                    t.sum += f64::from(u8::from(b));
                    write!(w, "<c{r} t=\"b\"><v>{}</v></c>", u8::from(b))?;
                }
                TruthValue::Date(d) => {
                    t.sum += d as f64;
                    write!(w, "<c{r} s=\"1\"><v>{d}</v></c>")?;
                }
                TruthValue::Text(id) => {
                    t.distinct = t.distinct.max(id + 1);
                    if shared {
                        write!(w, "<c{r} t=\"s\"><v>{}</v></c>", bases[c] + id)?;
                    } else {
                        write!(w, "<c{r} t=\"inlineStr\"><is><t>{}</t></is></c>", text_value(seed, c, id))?;
                    }
                }
            }
            if csv.is_some() {
                record[c] = truth_text(&value, seed, c);
            }
        }
        w.write_all(b"</row>")?;
        if let Some(csv) = &mut csv {
            csv.write_record(&record)?;
        }
    }
    w.write_all(b"</sheetData></worksheet>")?;
    if let Some(csv) = &mut csv {
        csv.flush()?;
    }
    Ok(truth)
}

fn put<W: Write + Seek>(zip: &mut ZipWriter<W>, name: &str, body: &str) -> io::Result<()> {
    let mut e = zip.start_entry(name, EntryMethod::Deflate)?;
    e.write_all(body.as_bytes())?;
    e.finish()
}

/// Counts bytes and optionally copies them.
struct Tee<'a, W> {
    inner: W,
    copy: Option<&'a mut dyn Write>,
    written: u64,
}

impl<'a, W> Tee<'a, W> {
    fn new(inner: W, copy: Option<&'a mut dyn Write>) -> Self {
        Tee { inner, copy, written: 0 }
    }
}

impl<W: Write> Write for Tee<'_, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        if let Some(c) = &mut self.copy {
            c.write_all(&buf[..n])?;
        }
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

const NS_MAIN: &str = "http://schemas.openxmlformats.org/spreadsheetml/2006/main";
const NS_REL: &str = "http://schemas.openxmlformats.org/officeDocument/2006/relationships";

const ROOT_RELS: &str = concat!(
    "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
    "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">",
    "<Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" Target=\"xl/workbook.xml\"/>",
    "</Relationships>"
);

const STYLES: &str = concat!(
    "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
    "<styleSheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\">",
    "<fonts count=\"1\"><font><sz val=\"11\"/><name val=\"Calibri\"/></font></fonts>",
    "<fills count=\"2\"><fill><patternFill patternType=\"none\"/></fill><fill><patternFill patternType=\"gray125\"/></fill></fills>",
    "<borders count=\"1\"><border><left/><right/><top/><bottom/><diagonal/></border></borders>",
    "<cellStyleXfs count=\"1\"><xf numFmtId=\"0\" fontId=\"0\" fillId=\"0\" borderId=\"0\"/></cellStyleXfs>",
    "<cellXfs count=\"2\"><xf numFmtId=\"0\" fontId=\"0\" fillId=\"0\" borderId=\"0\" xfId=\"0\"/>",
    "<xf numFmtId=\"14\" fontId=\"0\" fillId=\"0\" borderId=\"0\" xfId=\"0\" applyNumberFormat=\"1\"/></cellXfs>",
    "<cellStyles count=\"1\"><cellStyle name=\"Normal\" xfId=\"0\" builtinId=\"0\"/></cellStyles>",
    "</styleSheet>"
);

fn content_types(spec: &GenSpec, shared: bool) -> String {
    let mut s = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
        "<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">",
        "<Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/>",
        "<Default Extension=\"xml\" ContentType=\"application/xml\"/>",
        "<Override PartName=\"/xl/workbook.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/>",
        "<Override PartName=\"/xl/styles.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.styles+xml\"/>",
    ));
    for i in 1..=spec.sheets {
        s += &format!(
            "<Override PartName=\"/xl/worksheets/sheet{i}.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml\"/>"
        );
    }
    if shared {
        s += "<Override PartName=\"/xl/sharedStrings.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml\"/>";
    }
    s + "</Types>"
}

fn workbook_xml(spec: &GenSpec) -> String {
    let mut s = format!("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<workbook xmlns=\"{NS_MAIN}\" xmlns:r=\"{NS_REL}\"><sheets>");
    for i in 1..=spec.sheets {
        s += &format!("<sheet name=\"Sheet{i}\" sheetId=\"{i}\" r:id=\"rId{i}\"/>");
    }
    s + "</sheets></workbook>"
}

fn workbook_rels(spec: &GenSpec, shared: bool) -> String {
    let mut s = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">",
    );
    for i in 1..=spec.sheets {
        s += &format!("<Relationship Id=\"rId{i}\" Type=\"{NS_REL}/worksheet\" Target=\"worksheets/sheet{i}.xml\"/>");
    }
    let n = spec.sheets;
    s += &format!("<Relationship Id=\"rId{}\" Type=\"{NS_REL}/styles\" Target=\"styles.xml\"/>", n + 1);
    if shared {
        s += &format!("<Relationship Id=\"rId{}\" Type=\"{NS_REL}/sharedStrings\" Target=\"sharedStrings.xml\"/>", n + 2);
    }
    s + "</Relationships>"
}

/// Files written by [`generate_xlsx`].
#[derive(Clone, Debug)]
pub struct Generated {
    pub xlsx: PathBuf,
    /// Ground truth next to the workbook (`<stem>.csv`).
    pub csv: PathBuf,
    pub summary: GenSummary,
}

/// Writes `path` and its ground-truth CSV.
pub fn generate_xlsx(spec: &GenSpec, path: impl AsRef<Path>) -> io::Result<Generated> {
    let path = path.as_ref();
    let csv_path = path.with_extension("csv");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    let out = BufWriter::new(File::create(path)?);
    let (out, summary) = generate(
        spec,
        out,
        Outputs {
            csv: Some(&mut csv),
            sheet_xml: None,
        },
    )?;
    out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    csv.flush()?;
    let mut summary = summary;
    let a = crate::archive::Archive::open(path).map_err(io::Error::other)?;
    if let Some(e) = a.entry("xl/worksheets/sheet1.xml") {
        summary.sheet_compressed_bytes = e.compressed_size;
    }
    Ok(Generated {
        xlsx: path.to_path_buf(),
        csv: csv_path,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;
    use crate::archive::Archive;

    fn build(spec: &GenSpec) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let mut csv = Vec::new();
        let mut xml = Vec::new();
        let (out, _) = generate(
            spec,
            Cursor::new(Vec::new()),
            Outputs {
                csv: Some(&mut csv),
                sheet_xml: Some(&mut xml),
            },
        )
        .unwrap();
        (out.into_inner(), csv, xml)
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = GenSpec::mixed(50).blank(0.2).seed(9);
        assert_eq!(build(&spec), build(&spec));
        assert_ne!(build(&spec).1, build(&spec.clone().seed(10)).1);
    }

    #[test]
    fn smaller_files_are_prefixes() {
        let spec = GenSpec::mixed(40).blank(0.1).seed(3);
        let (_, small, _) = build(&spec);
        let (_, large, _) = build(&GenSpec { rows: 100, ..spec });
        assert!(large.starts_with(&small));
    }

    #[test]
    fn sheet_entry_holds_the_emitted_xml() {
        let spec = GenSpec::mixed(30).blank(0.3).refs(false);
        let (zip, _, xml) = build(&spec);
        let a = Archive::from_bytes(zip).unwrap();
        assert_eq!(a.read_entry_full("xl/worksheets/sheet1.xml").unwrap(), xml);
        assert!(a.entry("xl/sharedStrings.xml").is_some());
    }

    #[test]
    fn empty_sheet() {
        let (zip, csv, xml) = build(&GenSpec::numeric(0, 3));
        assert!(csv.is_empty());
        assert!(String::from_utf8(xml).unwrap().contains("<dimension ref=\"A1\"/><sheetData></sheetData>"));
        Archive::from_bytes(zip).unwrap();
    }

    #[test]
    fn text_ids_follow_the_unique_fraction() {
        let spec = GenSpec::uniform(4000, 1, ColumnKind::Text { unique: 0.25 });
        let mut g = ColumnGen::new(0, 0, spec.columns[0]);
        for _ in 0..4000 {
            g.next();
        }
        assert!((800..1200).contains(&g.ids), "{}", g.ids);
        let one = GenSpec::uniform(100, 1, ColumnKind::Text { unique: 0.0 });
        let mut g = ColumnGen::new(0, 0, one.columns[0]);
        for _ in 0..100 {
            g.next();
        }
        assert_eq!(g.ids, 1);
    }

    #[test]
    fn shared_indexes_cover_all_sheets() {
        let spec = GenSpec::uniform(20, 2, ColumnKind::Text { unique: 0.5 }).sheets(2);
        let (zip, _, _) = build(&spec);
        let a = Archive::from_bytes(zip).unwrap();
        let sst = String::from_utf8(a.read_entry_full("xl/sharedStrings.xml").unwrap()).unwrap();
        let count: usize = sst.matches("<si>").count();
        let declared: usize = sst.split("uniqueCount=\"").nth(1).unwrap().split('"').next().unwrap().parse().unwrap();
        assert_eq!(count, declared);
    }

    #[test]
    fn spec_json() {
        let spec: GenSpec = serde_json::from_str(r#"{"rows": 3, "columns": [{"type": "text", "unique": 0.5, "blank": 0.1}, {"type": "date"}]}"#).unwrap();
        assert_eq!(spec.columns[0].kind, ColumnKind::Text { unique: 0.5 });
        assert_eq!(spec.columns[1].blank, 0.0);
        assert!(spec.emit_refs && spec.emit_dimension);
        assert!(GenSpec::numeric(1, 1).blank(1.5).validate().is_err());
    }
}
