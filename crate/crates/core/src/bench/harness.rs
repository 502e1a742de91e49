//! Runs benchmark configurations in fresh child processes.
//!
//! Each run starts `sheetreader parse … --phase-log`, samples the child's
//! resident set at a fixed period and reads the phase line the child prints
//! to standard error when it finishes.

use std::env;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::report::{BenchReport, BenchRow, MemorySample};
use crate::options::{Mode, Phases, StringsMode, DEFAULT_RING_ELEMENTS, DEFAULT_RING_ELEMENT_SIZE};
use crate::sysmem::rss_of;

pub const DEFAULT_REPEAT: u32 = 5;
pub const DEFAULT_SAMPLE_PERIOD: Duration = Duration::from_millis(50);
/// Prefix of the line a child prints with `--phase-log`.
pub const PHASE_PREFIX: &str = "phases";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot start {binary}: {source}")]
    Spawn { binary: PathBuf, source: std::io::Error },
    #[error("child failed ({status}): {stderr}")]
    Child { status: String, stderr: String },
    #[error("child printed no phase line")]
    NoPhaseLine,
}

/// One benchmark configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub id: String,
    pub file: PathBuf,
    pub mode: Mode,
    /// Consecutive or segment workers.
    pub threads: usize,
    pub parser_threads: usize,
    pub ring_elements: usize,
    pub ring_element_size: usize,
    pub strings: StringsMode,
    pub extra_args: Vec<String>,
}

impl BenchConfig {
    pub fn new(file: impl Into<PathBuf>, mode: Mode) -> Self {
        let file = file.into();
        BenchConfig {
            id: format!("{}:{mode}", file.display()),
            file,
            mode,
            threads: crate::options::DEFAULT_THREADS,
            parser_threads: crate::options::DEFAULT_PARSER_THREADS,
            ring_elements: DEFAULT_RING_ELEMENTS,
            ring_element_size: DEFAULT_RING_ELEMENT_SIZE,
            strings: StringsMode::Parallel,
            extra_args: Vec::new(),
        }
    }

    /// Worker count reported in the `threads` column.
    pub fn reported_threads(&self) -> usize {
        match self.mode {
            Mode::Interleaved => self.parser_threads,
            _ => self.threads,
        }
    }

    pub fn args(&self) -> Vec<String> {
        let mut a = vec![
            "parse".to_string(),
            self.file.display().to_string(),
            "--mode".into(),
            self.mode.to_string(),
            "--threads".into(),
            self.threads.to_string(),
            "--parser-threads".into(),
            self.parser_threads.to_string(),
            "--ring-elements".into(),
            self.ring_elements.to_string(),
            "--ring-element-size".into(),
            self.ring_element_size.to_string(),
            "--strings".into(),
            self.strings.to_string(),
            "--output".into(),
            "summary".into(),
            "--out".into(),
            null_device().into(),
            "--phase-log".into(),
        ];
        a.extend(self.extra_args.iter().cloned());
        a
    }
}

fn null_device() -> &'static str {
    if cfg!(windows) {
        "NUL"
    } else {
        "/dev/null"
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub binary: PathBuf,
    pub repeat: u32,
    pub sample_period: Duration,
    pub caches_cleared: bool,
}

impl BenchOptions {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        BenchOptions {
            binary: binary.into(),
            repeat: DEFAULT_REPEAT,
            sample_period: DEFAULT_SAMPLE_PERIOD,
            caches_cleared: false,
        }
    }
}

/// What the child reports about itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChildStats {
    pub phases: Phases,
    pub rows: u64,
    /// High-water resident set reported by the child.
    pub peak_rss: u64,
}

/// Formats the `--phase-log` line.
pub fn phase_line(phases: &Phases, rows: u64, peak_rss: Option<u64>) -> String {
    format!("{PHASE_PREFIX} {phases} rows={rows} peak_rss_bytes={}", peak_rss.unwrap_or(0))
}

pub fn parse_phase_line(line: &str) -> Option<ChildStats> {
    let rest = line.strip_prefix(PHASE_PREFIX)?.strip_prefix(' ')?;
    let mut s = ChildStats::default();
    let ms = |v: &str| v.parse::<f64>().ok().map(|v| Duration::from_secs_f64(v / 1e3));
    for field in rest.split_whitespace() {
        let (k, v) = field.split_once('=')?;
        match k {
            "decompress_ms" => s.phases.decompress = ms(v)?,
            "parse_ms" => s.phases.parse = ms(v)?,
            "strings_ms" => s.phases.strings = ms(v)?,
            "transform_ms" => s.phases.transform = ms(v)?,
            "wall_ms" => s.phases.total = ms(v)?,
            "rows" => s.rows = v.parse().ok()?,
            "peak_rss_bytes" => s.peak_rss = v.parse().ok()?,
            _ => {}
        }
    }
    Some(s)
}

/// Result of one child run.
#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub stats: ChildStats,
    /// Wall time seen by the harness, including process start.
    pub elapsed: Duration,
    pub peak_rss: u64,
    pub samples: Vec<MemorySample>,
}

pub fn run_once(binary: &Path, config: &BenchConfig, period: Duration) -> Result<RunResult, HarnessError> {
    let start = Instant::now();
    let mut child = Command::new(binary)
        .args(config.args())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| HarnessError::Spawn {
            binary: binary.to_path_buf(),
            source,
        })?;
    let mut stderr_pipe = child.stderr.take().expect("piped stderr");
    // Drain stderr concurrently so a chatty child never blocks.
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr_pipe.read_to_string(&mut s);
        s
    });
    let mut samples = Vec::new();
    let status = loop {
        if let Some(rss) = rss_of(child.id()) {
            samples.push(MemorySample {
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
                rss_bytes: rss,
            });
        }
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => thread::sleep(period),
            Err(e) => {
                return Err(HarnessError::Child {
                    status: e.to_string(),
                    stderr: String::new(),
                })
            }
        }
    };
    let elapsed = start.elapsed();
    let stderr = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(HarnessError::Child {
            status: status.to_string(),
            stderr: stderr.trim().to_string(),
        });
    }
    let stats = stderr.lines().find_map(parse_phase_line).ok_or(HarnessError::NoPhaseLine)?;
    let sampled = samples.iter().map(|s| s.rss_bytes).max().unwrap_or(0);
    Ok(RunResult {
        stats,
        elapsed,
        peak_rss: sampled.max(stats.peak_rss),
        samples,
    })
}

/// Runs every configuration `options.repeat` times and averages the
/// successful runs. Failures are recorded in the row and the run goes on.
pub fn run_benchmark(matrix: &[BenchConfig], options: &BenchOptions) -> BenchReport {
    let mut report = BenchReport::default();
    for config in matrix {
        let mut row = BenchRow {
            config: config.id.clone(),
            mode: config.mode.to_string(),
            threads: config.reported_threads(),
            caches_cleared: options.caches_cleared,
            ..Default::default()
        };
        let mut last_samples = Vec::new();
        let mut peak_sum = 0u64;
        for _ in 0..options.repeat.max(1) {
            match run_once(&options.binary, config, options.sample_period) {
                Ok(r) => {
                    let p = r.stats.phases;
                    let ms = |d: Duration| d.as_secs_f64() * 1e3;
                    row.wall_ms += ms(p.total);
                    row.decompress_ms += ms(p.decompress);
                    row.parse_ms += ms(p.parse);
                    row.strings_ms += ms(p.strings);
                    row.transform_ms += ms(p.transform);
                    peak_sum += r.peak_rss;
                    row.rows = r.stats.rows;
                    row.repeats += 1;
                    last_samples = r.samples;
                }
                Err(e) => row.error = e.to_string(),
            }
        }
        if row.repeats > 0 {
            let n = f64::from(row.repeats);
            row.wall_ms /= n;
            row.decompress_ms /= n;
            row.parse_ms /= n;
            row.strings_ms /= n;
            row.transform_ms /= n;
            row.peak_rss_bytes = peak_sum / u64::from(row.repeats);
        }
        report.rows.push(row);
        report.samples.push(last_samples);
    }
    report
}

/// The `sheetreader` binary: `$SHEETREADER_BIN`, the running executable
/// when it is the binary, or a sibling of it (examples and tests live one
/// directory below the binary).
pub fn locate_binary() -> Option<PathBuf> {
    if let Some(p) = env::var_os("SHEETREADER_BIN") {
        return Some(PathBuf::from(p));
    }
    let exe = env::current_exe().ok()?;
    let name = format!("sheetreader{}", env::consts::EXE_SUFFIX);
    if exe.file_name().is_some_and(|n| n == name.as_str()) {
        return Some(exe);
    }
    exe.ancestors()
        .skip(1)
        .take(3)
        .map(|d| d.join(&name))
        .find(|p| p.is_file())
}
