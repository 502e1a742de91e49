//! Deterministic model of the ring protocol.
//!
//! The writer and the parsers run as explicit state machines whose steps
//! are interleaved by a seeded random scheduler. The model uses the same
//! [`ParserCursor`], [`may_fill`] and [`SheetScanner`] as the threaded
//! engine, and checks every schedule for:
//!
//! * reads of slots that are unpublished, being written or overwritten;
//! * the writer filling a slot some parser will still read;
//! * states where no thread can move although work remains;
//! * lost or duplicated cells compared with a sequential parse.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::protocol::{may_fill, Next, ParserCursor};
use crate::scan::{column_name, Feed, OwnedCellEvent, ScanError, SheetScanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// Slots in the ring (`N`).
    pub elements: usize,
    /// Parser threads (`K`).
    pub parsers: usize,
    /// Bytes per slot.
    pub element_size: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Violation {
    #[error("parser {parser} read index {index} from a slot holding {found:?} (writing: {writing})")]
    StaleRead {
        parser: usize,
        index: u64,
        found: Option<u64>,
        writing: bool,
    },
    #[error("writer filled index {index} while parser {parser} still needs index {needed}")]
    Overwrite { index: u64, parser: usize, needed: u64 },
    #[error("no thread can move (writer at {written}, published {published})")]
    Deadlock { written: u64, published: u64 },
    #[error("parser {parser} failed: {error}")]
    Scan { parser: usize, error: ScanError },
    #[error("cells differ from the sequential parse: {got} emitted, {expected} expected")]
    Cells { got: usize, expected: usize },
}

/// Counters over all explored schedules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelReport {
    pub schedules: u64,
    pub steps: u64,
    /// Schedules in which the writer had to wait for a hold at least once.
    pub writer_blocked: u64,
    /// Schedules in which a parser extended a cell into a foreign slot.
    pub extensions: u64,
    /// Distinct interleavings among the schedules run.
    pub distinct: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WriterStep {
    Check,
    Write,
    Publish,
    Finish,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ParserStep {
    /// Load `done`.
    LoadDone,
    /// Load `published` and decide, with the `done` seen before.
    Decide(bool),
    Read(u64, bool, bool),
    Release,
    Done,
}

struct Slot {
    tag: Option<u64>,
    writing: bool,
    len: usize,
    bytes: Vec<u8>,
}

struct Parser {
    cursor: ParserCursor,
    scanner: SheetScanner,
    step: ParserStep,
    cells: Vec<OwnedCellEvent>,
}

struct World<'d> {
    config: ModelConfig,
    doc: &'d [u8],
    total: u64,
    slots: Vec<Slot>,
    published: u64,
    done: bool,
    holds: Vec<u64>,
    w: u64,
    writer: WriterStep,
    parsers: Vec<Parser>,
    writer_blocked: bool,
    extended: bool,
    /// Fault injection for testing the checker itself.
    ignore_holds: bool,
}

impl<'d> World<'d> {
    fn new(config: ModelConfig, doc: &'d [u8]) -> Self {
        let size = config.element_size.max(1);
        World {
            config,
            doc,
            total: doc.len().div_ceil(size) as u64,
            slots: (0..config.elements)
                .map(|_| Slot {
                    tag: None,
                    writing: false,
                    len: 0,
                    bytes: vec![0; size],
                })
                .collect(),
            published: 0,
            done: false,
            holds: (0..config.parsers as u64).collect(),
            w: 0,
            writer: WriterStep::Check,
            parsers: (0..config.parsers)
                .map(|k| Parser {
                    cursor: ParserCursor::new(k, config.parsers),
                    scanner: SheetScanner::new(),
                    step: ParserStep::LoadDone,
                    cells: Vec::new(),
                })
                .collect(),
            writer_blocked: false,
            extended: false,
            ignore_holds: false,
        }
    }

    fn slot(&self, i: u64) -> usize {
        (i % self.config.elements as u64) as usize
    }

    fn writer_enabled(&self) -> bool {
        match self.writer {
            WriterStep::Check => self.w >= self.total || self.ignore_holds || may_fill(self.w, self.config.elements as u64, self.holds.iter().copied()),
            WriterStep::Done => false,
            _ => true,
        }
    }

    fn parser_enabled(&self, k: usize) -> bool {
        let p = &self.parsers[k];
        match p.step {
            // Decisions are monotone in (published, done), so a parser whose
            // decision would be `Wait` now only spins.
            ParserStep::LoadDone | ParserStep::Decide(_) => p.cursor.next(self.published, self.done) != Next::Wait,
            ParserStep::Done => false,
            _ => true,
        }
    }

    fn step_writer(&mut self) -> Result<(), Violation> {
        match self.writer {
            WriterStep::Check => {
                self.writer = if self.w >= self.total {
                    WriterStep::Finish
                } else {
                    WriterStep::Write
                };
            }
            WriterStep::Write => {
                let w = self.w;
                let n = self.config.elements as u64;
                for (k, p) in self.parsers.iter().enumerate() {
                    if p.step != ParserStep::Done && p.cursor.hold() + n <= w {
                        return Err(Violation::Overwrite {
                            index: w,
                            parser: k,
                            needed: p.cursor.hold(),
                        });
                    }
                }
                let size = self.config.element_size.max(1);
                let start = w as usize * size;
                let end = (start + size).min(self.doc.len());
                let i = self.slot(w);
                let slot = &mut self.slots[i];
                slot.tag = Some(w);
                slot.writing = true;
                slot.len = end - start;
                slot.bytes[..end - start].copy_from_slice(&self.doc[start..end]);
                self.writer = WriterStep::Publish;
            }
            WriterStep::Publish => {
                let i = self.slot(self.w);
                self.slots[i].writing = false;
                self.w += 1;
                self.published = self.w;
                self.writer = WriterStep::Check;
            }
            WriterStep::Finish => {
                self.done = true;
                self.writer = WriterStep::Done;
            }
            WriterStep::Done => {}
        }
        Ok(())
    }

    fn step_parser(&mut self, k: usize) -> Result<(), Violation> {
        let step = self.parsers[k].step;
        match step {
            ParserStep::LoadDone => self.parsers[k].step = ParserStep::Decide(self.done),
            ParserStep::Decide(done) => {
                let p = &mut self.parsers[k];
                p.step = match p.cursor.next(self.published, done) {
                    Next::Wait => ParserStep::LoadDone,
                    Next::Read { index, owned, fresh } => ParserStep::Read(index, owned, fresh),
                    Next::Finish { extending } => {
                        if extending {
                            p.scanner.finish().map_err(|error| Violation::Scan { parser: k, error })?;
                        }
                        self.holds[k] = u64::MAX;
                        ParserStep::Done
                    }
                };
            }
            ParserStep::Read(index, owned, fresh) => {
                let i = self.slot(index);
                let slot = &self.slots[i];
                if slot.tag != Some(index) || slot.writing || index >= self.published {
                    return Err(Violation::StaleRead {
                        parser: k,
                        index,
                        found: slot.tag,
                        writing: slot.writing,
                    });
                }
                let data = &slot.bytes[..slot.len];
                let p = &mut self.parsers[k];
                if fresh {
                    p.scanner.reset(index != 0);
                }
                if !owned {
                    self.extended = true;
                }
                let limit = if owned { data.len() } else { 0 };
                let r = p
                    .scanner
                    .feed(data, limit, &mut p.cells)
                    .map_err(|error| Violation::Scan { parser: k, error })?;
                p.cursor.advance(matches!(r, Feed::Stopped(_)));
                p.step = ParserStep::Release;
            }
            ParserStep::Release => {
                self.holds[k] = self.parsers[k].cursor.hold();
                self.parsers[k].step = ParserStep::LoadDone;
            }
            ParserStep::Done => {}
        }
        Ok(())
    }

    fn finished(&self) -> bool {
        self.writer == WriterStep::Done && self.parsers.iter().all(|p| p.step == ParserStep::Done)
    }
}

fn key(e: &OwnedCellEvent) -> (u32, u32) {
    (e.row, e.col)
}

/// Sequential reference parse.
pub fn sequential_cells(doc: &[u8]) -> Result<Vec<OwnedCellEvent>, ScanError> {
    let mut out = Vec::new();
    let mut s = SheetScanner::new();
    s.feed(doc, usize::MAX, &mut out)?;
    s.finish()?;
    Ok(out)
}

/// Runs one schedule chosen by `seed`; returns the number of steps taken.
pub fn run_schedule(config: ModelConfig, doc: &[u8], expected: &[OwnedCellEvent], seed: u64) -> Result<ModelReport, Violation> {
    schedule(config, doc, expected, seed).map(|(r, _)| r)
}

/// Runs one schedule and fingerprints the order in which actors stepped.
fn schedule(config: ModelConfig, doc: &[u8], expected: &[OwnedCellEvent], seed: u64) -> Result<(ModelReport, u64), Violation> {
    let mut trace = DefaultHasher::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = World::new(config, doc);
    let mut steps = 0u64;
    let mut enabled = Vec::with_capacity(config.parsers + 1);
    while !world.finished() {
        enabled.clear();
        if world.writer_enabled() {
            enabled.push(usize::MAX);
        } else if world.writer == WriterStep::Check {
            world.writer_blocked = true;
        }
        enabled.extend((0..config.parsers).filter(|&k| world.parser_enabled(k)));
        if enabled.is_empty() {
            return Err(Violation::Deadlock {
                written: world.w,
                published: world.published,
            });
        }
        let actor = enabled[rng.gen_range(0..enabled.len())];
        actor.hash(&mut trace);
        match actor {
            usize::MAX => world.step_writer()?,
            k => world.step_parser(k)?,
        }
        steps += 1;
    }
    let mut got: Vec<OwnedCellEvent> = world.parsers.into_iter().flat_map(|p| p.cells).collect();
    got.sort_by_key(key);
    let mut want = expected.to_vec();
    want.sort_by_key(key);
    if got != want {
        return Err(Violation::Cells {
            got: got.len(),
            expected: want.len(),
        });
    }
    let report = ModelReport {
        schedules: 1,
        steps,
        writer_blocked: world.writer_blocked as u64,
        extensions: world.extended as u64,
        distinct: 1,
    };
    Ok((report, trace.finish()))
}

/// Explores `schedules` seeded schedules starting at `seed`.
pub fn explore(config: ModelConfig, doc: &[u8], schedules: u64, seed: u64) -> Result<ModelReport, Violation> {
    let expected = sequential_cells(doc).map_err(|error| Violation::Scan { parser: usize::MAX, error })?;
    let mut total = ModelReport::default();
    let mut seen = HashSet::new();
    for s in 0..schedules {
        let (r, fingerprint) = schedule(config, doc, &expected, seed.wrapping_add(s))?;
        seen.insert(fingerprint);
        total.schedules += 1;
        total.steps += r.steps;
        total.writer_blocked += r.writer_blocked;
        total.extensions += r.extensions;
    }
    total.distinct = seen.len() as u64;
    Ok(total)
}

/// Small worksheet with referenced cells of mixed kinds, including inline
/// strings long enough to span several tiny slots.
pub fn model_document(rows: u32, cols: u32, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("<worksheet><sheetData>");
    for r in 1..=rows {
        s.push_str(&format!("<row r=\"{r}\">"));
        for c in 1..=cols {
            let at = format!("{}{r}", column_name(c));
            match rng.gen_range(0..4) {
                0 => s.push_str(&format!("<c r=\"{at}\"><v>{}</v></c>", rng.gen_range(-999..999))),
                1 => s.push_str(&format!("<c r=\"{at}\" t=\"s\"><v>{}</v></c>", rng.gen_range(0..9))),
                2 => {
                    let len = rng.gen_range(0..24);
                    let text: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
                    s.push_str(&format!("<c r=\"{at}\" t=\"inlineStr\"><is><t>{text}&amp;</t></is></c>"));
                }
                _ => s.push_str(&format!("<c r=\"{at}\"/>")),
            }
        }
        s.push_str("</row>");
    }
    s.push_str("</sheetData></worksheet>");
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_holds_on_small_rings() {
        let doc = model_document(3, 3, 1);
        for elements in 2..=4 {
            for parsers in 1..=3 {
                for element_size in [5, 16] {
                    let c = ModelConfig {
                        elements,
                        parsers,
                        element_size,
                    };
                    let r = explore(c, &doc, 40, 7).unwrap_or_else(|v| panic!("{c:?}: {v}"));
                    assert_eq!(r.schedules, 40);
                }
            }
        }
    }

    #[test]
    fn checker_catches_a_writer_ignoring_holds() {
        let doc = model_document(3, 3, 3);
        let c = ModelConfig {
            elements: 2,
            parsers: 2,
            element_size: 8,
        };
        let caught = (0..200).any(|seed| {
            let mut w = World::new(c, &doc);
            w.ignore_holds = true;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while !w.finished() {
                let r = if w.writer_enabled() && rng.gen_bool(0.7) {
                    w.step_writer()
                } else {
                    match (0..2).find(|&k| w.parser_enabled(k)) {
                        Some(k) => w.step_parser(k),
                        None => w.step_writer(),
                    }
                };
                if r.is_err() {
                    return true;
                }
            }
            false
        });
        assert!(caught);
    }
}
