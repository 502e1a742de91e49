//! Acceptance suite: prints one `PASS`/`FAIL` line per criterion.
//!
//! Everything runs inside a single test so the counting allocator sees one
//! workload at a time. Timing criteria that cannot hold on the machine at
//! hand (too few cores) are reported as `FAIL (environment: …)` without
//! failing the test; every other failure fails it.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::fs::File;
use std::io::{self, BufWriter, Cursor, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sheetreader::archive::Archive;
use sheetreader::bench::gen::{generate, GenSpec, Outputs};
use sheetreader::frame::CsvTransformer;
use sheetreader::interleaved::model::{explore, model_document, ModelConfig};
use sheetreader::pardeflate::repack_entry;
use sheetreader::scan::{OwnedCellEvent, SheetScanner};
use sheetreader::{EngineOptions, Mode, SheetSelector, StringsMode, Workbook};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static ALLOCS: AtomicU64 = AtomicU64::new(0);

fn grow(n: usize) {
    let now = LIVE.fetch_add(n, Ordering::Relaxed) + n;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            ALLOCS.fetch_add(1, Ordering::Relaxed);
            grow(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            ALLOCS.fetch_add(1, Ordering::Relaxed);
            grow(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            ALLOCS.fetch_add(1, Ordering::Relaxed);
            if new_size >= layout.size() {
                grow(new_size - layout.size());
            } else {
                LIVE.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

/// Heap activity of one closure.
#[derive(Clone, Copy, Debug)]
struct Usage {
    allocs: u64,
    /// Highest live heap above the starting level.
    peak: usize,
    /// Heap still held afterwards (the result).
    retained: usize,
}

fn measure<T>(f: impl FnOnce() -> T) -> (T, Usage) {
    let base = LIVE.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let before = ALLOCS.load(Ordering::Relaxed);
    let r = f();
    let usage = Usage {
        allocs: ALLOCS.load(Ordering::Relaxed) - before,
        peak: PEAK.load(Ordering::Relaxed).saturating_sub(base),
        retained: LIVE.load(Ordering::Relaxed).saturating_sub(base),
    };
    (r, usage)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    /// Failed, and the machine lacks the cores the criterion presumes.
    Environment,
}

struct Board {
    cores: usize,
    failures: Vec<String>,
}

impl Board {
    fn report(&mut self, name: &str, pass: bool, needs_cores: usize, detail: String) -> Verdict {
        let verdict = match (pass, self.cores < needs_cores) {
            (true, _) => Verdict::Pass,
            (false, true) => Verdict::Environment,
            (false, false) => Verdict::Fail,
        };
        let line = match verdict {
            Verdict::Pass => format!("PASS {name}: {detail}"),
            Verdict::Fail => format!("FAIL {name}: {detail}"),
            Verdict::Environment => format!(
                "FAIL {name}: {detail} (environment: {} CPU(s), criterion presumes {needs_cores})",
                self.cores
            ),
        };
        // Written past the test harness capture so the lines always show.
        let mut out = io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
        if verdict == Verdict::Fail {
            self.failures.push(line);
        }
        verdict
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Fastest of `n` runs.
fn best_of(n: usize, mut f: impl FnMut()) -> Duration {
    (0..n)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

fn write_workbook(spec: &GenSpec, path: &Path) -> u64 {
    let out = BufWriter::new(File::create(path).unwrap());
    let (out, summary) = generate(spec, out, Outputs::default()).unwrap();
    out.into_inner().unwrap().sync_all().unwrap();
    summary.sheet_bytes
}

fn read(wb: &Workbook, mode: Mode, o: &EngineOptions) -> sheetreader::ColumnFrame {
    wb.read(&SheetSelector::Index(1), mode, o)
        .unwrap_or_else(|e| panic!("{mode} {o:?}: {e}"))
}

fn numeric_rows_for(bytes: u64, cols: usize) -> u32 {
    // Measured on a small sample, then scaled.
    let sample = 2000;
    let f = fixture(&GenSpec::numeric(sample, cols));
    let per_row = f.xml.len() as f64 / f64::from(sample);
    (bytes as f64 / per_row * 1.03).ceil() as u32
}

fn correctness(board: &mut Board) {
    let t = Instant::now();
    let engines = engine_matrix();
    let mut cases: Vec<Case> = ROWS[..3].iter().flat_map(|&r| full_product(r)).collect();
    let big = pairwise(ROWS[3]);
    cases.extend(&big);
    let mut errors = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        if let Err(e) = check_case(case, i as u64, &engines) {
            errors.push(e);
        }
    }
    let elapsed = t.elapsed();
    let ok = errors.is_empty() && elapsed < Duration::from_secs(300);
    board.report(
        "correctness oracle suite",
        ok,
        0,
        format!(
            "{} cases ({} at 50k rows, all-pairs cover) x {} engine configs, {} mismatches, {:.1}s (limit 300s){}",
            cases.len(),
            big.len(),
            engines.len(),
            errors.len(),
            secs(elapsed),
            errors.first().map(|e| format!("; first: {e}")).unwrap_or_default()
        ),
    );
}

fn window_split(board: &mut Board) {
    let t = Instant::now();
    let mut rows = 200;
    let xml = loop {
        let f = fixture(&GenSpec::mixed(rows).blank(0.1).seed(11));
        if f.xml.len() >= 1 << 20 {
            break f.xml;
        }
        rows *= 2;
    };
    let mut whole = Vec::<OwnedCellEvent>::new();
    let mut s = SheetScanner::new();
    s.feed(&xml, usize::MAX, &mut whole).unwrap();
    s.finish().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let partitions = 1000;
    for _ in 0..partitions {
        let mut cuts: Vec<usize> = (0..rng.gen_range(1..400)).map(|_| rng.gen_range(0..=xml.len())).collect();
        cuts.sort_unstable();
        let mut got = Vec::<OwnedCellEvent>::with_capacity(whole.len());
        let mut s = SheetScanner::new();
        let mut from = 0;
        let mut ok = true;
        for cut in cuts.into_iter().chain([xml.len()]) {
            ok &= s.feed(&xml[from..cut], usize::MAX, &mut got).is_ok();
            from = cut;
        }
        ok &= s.finish().is_ok();
        if !ok || got != whole {
            mismatches += 1;
        }
    }
    let elapsed = t.elapsed();
    board.report(
        "window-split invariance",
        mismatches == 0 && elapsed < Duration::from_secs(30),
        0,
        format!(
            "{partitions} random partitions of {} bytes ({} cells), {mismatches} differing, {:.1}s (limit 30s)",
            xml.len(),
            whole.len(),
            secs(elapsed)
        ),
    );
}

fn ring_protocol(board: &mut Board) {
    let t = Instant::now();
    let doc = model_document(4, 4, 9);
    let configs: Vec<ModelConfig> = (2..=4)
        .flat_map(|elements| {
            (1..=3).map(move |parsers| ModelConfig {
                elements,
                parsers,
                element_size: 7,
            })
        })
        .collect();
    let per = 100_000u64.div_ceil(configs.len() as u64);
    let (mut schedules, mut distinct, mut blocked, mut extended) = (0, 0, 0, 0);
    let mut violation = None;
    for (i, c) in configs.iter().enumerate() {
        match explore(*c, &doc, per, (i as u64) << 32) {
            Ok(r) => {
                schedules += r.schedules;
                distinct += r.distinct;
                blocked += r.writer_blocked;
                extended += r.extensions;
            }
            Err(v) => {
                violation = Some(format!("{c:?}: {v}"));
                break;
            }
        }
    }
    let elapsed = t.elapsed();
    board.report(
        "ring-protocol safety",
        violation.is_none() && distinct >= 100_000 && elapsed < Duration::from_secs(120),
        0,
        format!(
            "{schedules} schedules, {distinct} distinct interleavings over N 2-4 x K 1-3; writer waited in {blocked}, \
             cells extended across slots in {extended}; {:.1}s (limit 120s){}",
            secs(elapsed),
            violation.map(|v| format!("; violation: {v}")).unwrap_or_default()
        ),
    );
}

fn constant_memory(board: &mut Board) {
    let t = Instant::now();
    let options = EngineOptions::default();
    let measure_rows = |rows| {
        let f = fixture_without_xml(&GenSpec::numeric(rows, 20).seed(3));
        drop(f.csv);
        let (frame, usage) = measure(|| read(&f.workbook, Mode::Interleaved, &options));
        assert_eq!(frame.n_rows(), rows as usize);
        drop(frame);
        (usage, f.summary.sheet_bytes)
    };
    let (small, small_bytes) = measure_rows(20_000);
    let (large, large_bytes) = measure_rows(200_000);
    let frame_growth = large.retained as f64 - small.retained as f64;
    let peak_growth = large.peak as f64 - small.peak as f64;
    let ratio = peak_growth / frame_growth;
    let elapsed = t.elapsed();
    board.report(
        "constant memory (interleaved)",
        small.allocs == large.allocs && (ratio - 1.0).abs() <= 0.10 && elapsed < Duration::from_secs(180),
        0,
        format!(
            "allocations {} vs {} for {small_bytes} vs {large_bytes} byte sheets; peak grew {:.1} MB for {:.1} MB more frame \
             (ratio {ratio:.3}, limit 1 +/- 0.10); ring {:.1} MB; {:.1}s",
            small.allocs,
            large.allocs,
            peak_growth / 1e6,
            frame_growth / 1e6,
            (options.ring_elements * options.ring_element_size) as f64 / 1e6,
            secs(elapsed)
        ),
    );
}

fn consecutive_memory(board: &mut Board, dir: &Path) {
    let path = dir.join("consecutive-100mb.xlsx");
    let rows = numeric_rows_for(100 << 20, 40);
    write_workbook(&GenSpec::numeric(rows, 40).seed(21), &path);
    let wb = Workbook::open(&path).unwrap();
    let entry = wb.archive().entry("xl/worksheets/sheet1.xml").unwrap().clone();
    let both = (entry.compressed_size + entry.uncompressed_size) as f64;
    let (frame, usage) = measure(|| read(&wb, Mode::Consecutive, &EngineOptions::default()));
    drop(frame);
    let ratio = usage.peak as f64 / both;
    board.report(
        "consecutive memory profile",
        (1.0..=1.3).contains(&ratio),
        0,
        format!(
            "peak heap growth {:.1} MB vs compressed {:.1} MB + uncompressed {:.1} MB = {:.1} MB (ratio {ratio:.3}, range 1.0-1.3; frame {:.1} MB)",
            usage.peak as f64 / 1e6,
            entry.compressed_size as f64 / 1e6,
            entry.uncompressed_size as f64 / 1e6,
            both / 1e6,
            usage.retained as f64 / 1e6
        ),
    );
    std::fs::remove_file(path).ok();
}

struct BigTimings {
    consecutive_1: Duration,
    consecutive_8: Duration,
    interleaved_1: Duration,
    interleaved_2: Duration,
}

fn performance(board: &mut Board, dir: &Path) {
    let path = dir.join("numeric-200mb.xlsx");
    let rows = numeric_rows_for(200 << 20, 40);
    let bytes = write_workbook(&GenSpec::numeric(rows, 40).seed(31), &path);
    assert!(bytes >= 200 << 20, "{bytes}");
    let wb = Workbook::open(&path).unwrap();
    let repeats = 3;
    let time = |mode, o: EngineOptions| best_of(repeats, || drop(read(&wb, mode, &o)));
    let t = BigTimings {
        consecutive_1: time(Mode::Consecutive, EngineOptions::default().threads(1)),
        consecutive_8: time(Mode::Consecutive, EngineOptions::default().threads(8)),
        interleaved_1: time(Mode::Interleaved, EngineOptions::default().parser_threads(1)),
        interleaved_2: time(Mode::Interleaved, EngineOptions::default().parser_threads(2)),
    };
    let scaling = secs(t.consecutive_8) / secs(t.consecutive_1);
    let parsers = secs(t.interleaved_2) / secs(t.interleaved_1);
    board.report(
        "thread scaling",
        scaling <= 0.7 && parsers <= 1.05,
        8,
        format!(
            "{:.0} MB sheet: consecutive 8 threads {:.2}s / 1 thread {:.2}s = {scaling:.2} (limit 0.70); \
             interleaved 2 parsers {:.2}s / 1 parser {:.2}s = {parsers:.2} (limit 1.05)",
            bytes as f64 / 1e6,
            secs(t.consecutive_8),
            secs(t.consecutive_1),
            secs(t.interleaved_2),
            secs(t.interleaved_1)
        ),
    );
    board.report(
        "engine ordering",
        t.consecutive_8 <= t.interleaved_2,
        8,
        format!(
            "consecutive 8 threads {:.2}s vs interleaved 2 parsers {:.2}s",
            secs(t.consecutive_8),
            secs(t.interleaved_2)
        ),
    );
    parallel_decompression(board, dir, &wb, t.interleaved_2);
    drop(wb);
    std::fs::remove_file(path).ok();
}

fn parallel_decompression(board: &mut Board, dir: &Path, wb: &Workbook, interleaved_default: Duration) {
    let name = "xl/worksheets/sheet1.xml";
    let repacked_path = dir.join("numeric-200mb-repacked.xlsx");
    let out = BufWriter::new(File::create(&repacked_path).unwrap());
    let (out, index) = repack_entry(wb.archive(), name, 1 << 20, 6, out).unwrap();
    out.into_inner().unwrap().sync_all().unwrap();

    // Validity: a stock inflater reproduces the original bytes.
    let original = wb.archive().read_entry_full(name).unwrap();
    let repacked = Archive::open(&repacked_path).unwrap();
    let raw = repacked.read_raw(name).unwrap();
    let mut inflated = Vec::with_capacity(original.len());
    let stock_ok = flate2::read::DeflateDecoder::new(&raw[..]).read_to_end(&mut inflated).is_ok();
    let identical = stock_ok && inflated == original;
    drop((original, inflated, raw));

    let rwb = Workbook::from_archive(repacked).unwrap().with_index(index.clone());
    let segments = index.segments(8).len();
    let o = EngineOptions::default().threads(8);
    let parallel = best_of(3, || drop(read(&rwb, Mode::ParallelDeflate, &o)));
    let speedup = secs(interleaved_default) / secs(parallel);
    if !identical {
        board.report("parallel decompression", false, 0, "repacked stream does not inflate to the original under flate2".into());
    } else {
        board.report(
            "parallel decompression",
            speedup >= 1.3 && segments >= 8,
            8,
            format!(
                "repacked stream inflates byte-identically under flate2; {} boundaries, {segments} segments; \
                 8 workers {:.2}s vs interleaved default {:.2}s = {speedup:.2}x (limit 1.30x)",
                index.boundaries.len(),
                secs(parallel),
                secs(interleaved_default)
            ),
        );
    }
    drop(rwb);
    std::fs::remove_file(&repacked_path).ok();
}

fn shared_strings(board: &mut Board, dir: &Path) {
    let path = dir.join("mixed-100mb.xlsx");
    let per_row = fixture(&GenSpec::mixed(500)).xml.len() as f64 / 500.0;
    let rows = ((100u64 << 20) as f64 / per_row * 1.03).ceil() as u32;
    let bytes = write_workbook(&GenSpec::mixed(rows).seed(41), &path);
    let wb = Workbook::open(&path).unwrap();
    let time = |strings| {
        let o = EngineOptions::default().strings(strings);
        best_of(3, || drop(read(&wb, Mode::Interleaved, &o)))
    };
    let sequential = time(StringsMode::Sequential);
    let parallel = time(StringsMode::Parallel);
    let reduction = 1.0 - secs(parallel) / secs(sequential);
    board.report(
        "shared-strings parallelism",
        reduction >= 0.10,
        4,
        format!(
            "{:.0} MB mixed sheet, interleaved: parallel strings {:.2}s vs sequential {:.2}s = {:.1}% less (limit 10%)",
            bytes as f64 / 1e6,
            secs(parallel),
            secs(sequential),
            reduction * 100.0
        ),
    );
    drop(wb);
    std::fs::remove_file(path).ok();
}

fn determinism(board: &mut Board) {
    let t = Instant::now();
    let mut engines = engine_matrix();
    engines.extend([
        (Mode::Interleaved, EngineOptions::default().strings(StringsMode::Sequential)),
        (Mode::Consecutive, EngineOptions::default().strings(StringsMode::Sequential)),
    ]);
    let cases: Vec<Case> = ROWS[..3].iter().flat_map(|&r| full_product(r)).collect();
    let (mut files, mut runs, mut differing) = (0, 0, Vec::new());
    for (i, case) in cases.iter().enumerate() {
        let f = fixture_without_xml(&case.spec(1000 + i as u64));
        let name = "xl/worksheets/sheet1.xml";
        let (out, index) = repack_entry(f.workbook.archive(), name, 16 << 10, 6, Cursor::new(Vec::new())).unwrap();
        let repacked = Workbook::from_archive(Archive::from_bytes(out.into_inner()).unwrap())
            .unwrap()
            .with_index(index);
        let reference = read(&f.workbook, Mode::Consecutive, &EngineOptions::default()).transform(CsvTransformer);
        let mut check = |label: String, wb: &Workbook, mode: Mode, o: &EngineOptions| {
            for _ in 0..2 {
                runs += 1;
                if read(wb, mode, o).transform(CsvTransformer) != reference {
                    differing.push(format!("{case:?} {label}"));
                }
            }
        };
        for (mode, o) in &engines {
            check(format!("{mode} {o:?}"), &f.workbook, *mode, o);
        }
        for threads in [1, 2, 8] {
            let o = EngineOptions::default().threads(threads);
            check(format!("parallel-deflate {threads}"), &repacked, Mode::ParallelDeflate, &o);
        }
        files += 1;
    }
    board.report(
        "CSV determinism",
        differing.is_empty(),
        0,
        format!(
            "{files} files x {} configurations x 2 runs = {runs} CSVs, {} differing from the first; {:.1}s{}",
            engines.len() + 3,
            differing.len(),
            secs(t.elapsed()),
            differing.first().map(|d| format!("; first: {d}")).unwrap_or_default()
        ),
    );
}

#[test]
fn acceptance() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut board = Board {
        cores,
        failures: Vec::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    correctness(&mut board);
    window_split(&mut board);
    ring_protocol(&mut board);
    constant_memory(&mut board);
    consecutive_memory(&mut board, dir.path());
    performance(&mut board, dir.path());
    shared_strings(&mut board, dir.path());
    determinism(&mut board);
    assert!(board.failures.is_empty(), "{}", board.failures.join("\n"));
}
