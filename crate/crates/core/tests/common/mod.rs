#![allow(dead_code)]

use std::io::Cursor;

use sheetreader::archive::Archive;
use sheetreader::bench::gen::{generate, ColumnKind, GenSpec, GenSummary, Outputs};
use sheetreader::frame::{ColumnData, CsvTransformer};
use sheetreader::{ColumnFrame, EngineOptions, Mode, SheetSelector, Workbook};

pub struct Fixture {
    pub workbook: Workbook,
    pub csv: Vec<u8>,
    pub xml: Vec<u8>,
    pub summary: GenSummary,
}

pub fn fixture(spec: &GenSpec) -> Fixture {
    build(spec, true)
}

/// Same as [`fixture`] but does not keep the worksheet XML.
pub fn fixture_without_xml(spec: &GenSpec) -> Fixture {
    build(spec, false)
}

fn build(spec: &GenSpec, keep_xml: bool) -> Fixture {
    let mut csv = Vec::new();
    let mut xml = Vec::new();
    let (out, summary) = generate(
        spec,
        Cursor::new(Vec::new()),
        Outputs {
            csv: Some(&mut csv),
            sheet_xml: keep_xml.then_some(&mut xml as &mut dyn std::io::Write),
        },
    )
    .expect("generate");
    let archive = Archive::from_bytes(out.into_inner()).expect("archive");
    Fixture {
        workbook: Workbook::from_archive(archive).expect("workbook"),
        csv,
        xml,
        summary,
    }
}

pub fn csv_of(wb: &Workbook, mode: Mode, options: &EngineOptions) -> Vec<u8> {
    wb.read(&SheetSelector::Index(1), mode, options)
        .unwrap_or_else(|e| panic!("{mode} {options:?}: {e}"))
        .transform(CsvTransformer)
}

/// Engine configurations exercised by the correctness suites.
pub fn engine_matrix() -> Vec<(Mode, EngineOptions)> {
    let mut out = Vec::new();
    for t in [1, 2, 8] {
        out.push((Mode::Consecutive, EngineOptions::default().threads(t)));
    }
    for k in [1, 2, 4] {
        for (n, size) in [(2, 4096), (1024, 32768)] {
            out.push((Mode::Interleaved, EngineOptions::default().parser_threads(k).ring(n, size)));
        }
    }
    out
}

/// First differing line, for readable failures.
pub fn first_difference(a: &[u8], b: &[u8]) -> Option<(usize, String, String)> {
    let (a, b) = (String::from_utf8_lossy(a), String::from_utf8_lossy(b));
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut i = 0;
    loop {
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x != y => return Some((i, x.unwrap_or("<eof>").into(), y.unwrap_or("<eof>").into())),
            _ => i += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Numeric,
    /// The fixed 100-column 40/30/20/10 mix.
    Mixed,
    Text,
}

pub const ROWS: [u32; 4] = [0, 1, 1000, 50_000];
pub const COLS: [usize; 3] = [1, 20, 100];
pub const BLANKS: [f64; 3] = [0.0, 0.1, 0.5];
pub const SHAPES: [Shape; 3] = [Shape::Numeric, Shape::Mixed, Shape::Text];

/// One point of the correctness matrix.
#[derive(Clone, Copy, Debug)]
pub struct Case {
    pub rows: u32,
    pub cols: usize,
    pub blank: f64,
    pub shape: Shape,
    pub refs: bool,
    pub dimension: bool,
}

impl Case {
    pub fn spec(&self, seed: u64) -> GenSpec {
        let base = match self.shape {
            Shape::Numeric => GenSpec::numeric(self.rows, self.cols),
            Shape::Mixed => GenSpec::mixed(self.rows),
            Shape::Text => GenSpec::uniform(self.rows, self.cols, ColumnKind::Text { unique: 0.5 }),
        };
        base.blank(self.blank).refs(self.refs).dimension(self.dimension).seed(seed)
    }

    fn levels(&self) -> [usize; 5] {
        let pos = |xs: &[f64], x: f64| xs.iter().position(|&v| v == x).unwrap();
        [
            COLS.iter().position(|&c| c == self.cols).unwrap(),
            pos(&BLANKS, self.blank),
            SHAPES.iter().position(|&s| s == self.shape).unwrap(),
            self.refs as usize,
            self.dimension as usize,
        ]
    }
}

/// Every combination for `rows`. The mixed shape has its own column count,
/// so it appears only with 100 columns.
pub fn full_product(rows: u32) -> Vec<Case> {
    let mut out = Vec::new();
    for cols in COLS {
        for blank in BLANKS {
            for shape in SHAPES {
                if shape == Shape::Mixed && cols != 100 {
                    continue;
                }
                for refs in [true, false] {
                    for dimension in [true, false] {
                        out.push(Case {
                            rows,
                            cols,
                            blank,
                            shape,
                            refs,
                            dimension,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Greedy all-pairs cover of [`full_product`]: every feasible pair of factor
/// levels occurs in at least one chosen case.
pub fn pairwise(rows: u32) -> Vec<Case> {
    use std::collections::HashSet;
    let all = full_product(rows);
    let pairs = |c: &Case| {
        let l = c.levels();
        let mut v = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                v.push((i, l[i], j, l[j]));
            }
        }
        v
    };
    let mut uncovered: HashSet<_> = all.iter().flat_map(pairs).collect();
    let mut out = Vec::new();
    while !uncovered.is_empty() {
        let best = all
            .iter()
            .max_by_key(|c| (pairs(c).iter().filter(|p| uncovered.contains(*p)).count(), c.cols))
            .unwrap();
        for p in pairs(best) {
            uncovered.remove(&p);
        }
        out.push(*best);
    }
    out
}

/// Same shape, same validity and the same values, doubles compared bit for bit.
pub fn frames_identical(a: &ColumnFrame, b: &ColumnFrame) -> bool {
    let bits = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
    a.n_rows() == b.n_rows()
        && a.header_names() == b.header_names()
        && a.n_cols() == b.n_cols()
        && a.columns().iter().zip(b.columns()).all(|(x, y)| {
            x.validity() == y.validity()
                && x.error_count() == y.error_count()
                && match (x.data(), y.data()) {
                    (ColumnData::Double(p), ColumnData::Double(q)) | (ColumnData::Date(p), ColumnData::Date(q)) => bits(p, q),
                    (p, q) => p == q,
                }
        })
}

/// Parses `case` with every engine. The first frame is rendered and compared
/// with the ground-truth CSV; the others must be identical to it.
pub fn check_case(case: &Case, seed: u64, engines: &[(Mode, EngineOptions)]) -> Result<(), String> {
    // Level 1 keeps generation cheap; the engines do not care.
    let f = fixture_without_xml(&case.spec(seed).level(1));
    let mut first: Option<ColumnFrame> = None;
    for (mode, o) in engines {
        let frame = f
            .workbook
            .read(&SheetSelector::Index(1), *mode, o)
            .map_err(|e| format!("{case:?} {mode} {o:?}: {e}"))?;
        match &first {
            None => {
                let got = frame.transform(CsvTransformer);
                if got != f.csv {
                    return Err(format!("{case:?} {mode} {o:?}: {:?}", first_difference(&got, &f.csv)));
                }
                first = Some(frame);
            }
            Some(reference) => {
                if !frames_identical(reference, &frame) {
                    let got = frame.transform(CsvTransformer);
                    return Err(format!("{case:?} {mode} {o:?}: {:?}", first_difference(&got, &f.csv)));
                }
            }
        }
    }
    Ok(())
}
