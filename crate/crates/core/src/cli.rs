//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::gen::{generate, generate_xlsx, ColumnKind, GenSpec, Outputs};
use crate::bench::harness::{locate_binary, phase_line, run_benchmark, BenchConfig, BenchOptions};
use crate::bench::report::{emit_report, emit_samples};
use crate::error::Error;
use crate::frame::write_csv;
use crate::metadata::SheetSelector;
use crate::options::{EngineOptions, Mode, StringsMode};
use crate::pardeflate::{read_index, repack_entry, sidecar_path, write_index, DEFAULT_BOUNDARY_INTERVAL};
use crate::sysmem::peak_rss;
use crate::workbook::Workbook;

/// Parses a byte count with an optional binary suffix: `32768`, `32KB`,
/// `32k`, `4MiB`, `1G`.
pub fn parse_size(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, suffix) = t.split_at(split);
    let n: u64 = digits.parse().map_err(|_| format!("invalid size `{s}`"))?;
    let mult: u64 = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        "g" | "gb" | "gib" => 1 << 30,
        _ => return Err(format!("unknown size suffix in `{s}`")),
    };
    n.checked_mul(mult).ok_or_else(|| format!("size `{s}` overflows"))
}

fn size_usize(s: &str) -> Result<usize, String> {
    parse_size(s).map(|v| v as usize)
}

#[derive(Parser, Debug)]
#[command(name = "sheetreader", version, about = "Parallel XLSX worksheet loader")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load a sheet and print it as CSV or a summary.
    Parse(ParseArgs),
    /// List sheets, dimensions and the shared-strings count.
    Info(InfoArgs),
    /// Generate a synthetic workbook plus ground-truth CSV.
    Gen(GenArgs),
    /// Run benchmark configurations in child processes.
    Bench(BenchArgs),
    /// Recompress a worksheet with reset boundaries for parallel-deflate mode.
    Repack(RepackArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Csv,
    Summary,
}

#[derive(Args, Debug, Clone)]
pub struct EngineArgs {
    #[arg(long, value_parser = parse_mode, default_value = "consecutive")]
    pub mode: Mode,
    /// Consecutive chunk workers or parallel-deflate segment workers.
    #[arg(long, env = "SHEETREADER_THREADS", default_value_t = crate::options::DEFAULT_THREADS)]
    pub threads: usize,
    /// Interleaved ring consumers.
    #[arg(long, default_value_t = crate::options::DEFAULT_PARSER_THREADS)]
    pub parser_threads: usize,
    #[arg(long, value_parser = size_usize, default_value = "1024")]
    pub ring_elements: usize,
    #[arg(long, value_parser = size_usize, default_value = "32KB")]
    pub ring_element_size: usize,
    #[arg(long, value_parser = parse_strings, default_value = "parallel")]
    pub strings: StringsMode,
    /// Use row 1 as column names.
    #[arg(long)]
    pub headers: bool,
    /// Keep date-formatted numbers as plain numbers.
    #[arg(long)]
    pub no_dates: bool,
    /// Memory the consecutive engine may use (default: what the OS reports
    /// as available).
    #[arg(long, value_parser = parse_size)]
    pub memory_budget: Option<u64>,
}

impl EngineArgs {
    pub fn options(&self) -> EngineOptions {
        EngineOptions {
            threads: self.threads,
            parser_threads: self.parser_threads,
            ring_elements: self.ring_elements,
            ring_element_size: self.ring_element_size,
            strings: self.strings,
            headers: self.headers,
            dates: !self.no_dates,
            memory_budget: self.memory_budget,
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strings(s: &str) -> Result<StringsMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    pub file: PathBuf,
    /// Sheet name or 1-based position.
    #[arg(long, default_value = "1")]
    pub sheet: String,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, value_enum, default_value = "csv")]
    pub output: Output,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Check CRC-32 of every part read.
    #[arg(long)]
    pub verify: bool,
    /// Retry with the interleaved engine when the consecutive engine runs
    /// out of memory.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub fallback: bool,
    /// Boundary index for parallel-deflate mode (default: `<file>.sridx`).
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Print stage timings and peak memory to standard error.
    #[arg(long)]
    pub phase_log: bool,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    pub file: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Alternating float and integer columns.
    Numeric,
    /// 40 float, 30 integer, 20 text (25% unique), 10 text (75% unique).
    Mixed,
    Float,
    Integer,
    Text,
    Boolean,
    Date,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Workbook to write; the ground truth goes to the same path with a
    /// `.csv` extension.
    pub out: PathBuf,
    /// JSON generator spec; the other shape flags are ignored.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub rows: u32,
    /// Column count (ignored by `--kind mixed`).
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
    #[arg(long, value_enum, default_value = "numeric")]
    pub kind: GenKind,
    /// Chance that a text cell introduces a new string.
    #[arg(long, default_value_t = 0.5)]
    pub unique: f64,
    #[arg(long, default_value_t = 0.0)]
    pub blank: f64,
    #[arg(long)]
    pub no_refs: bool,
    #[arg(long)]
    pub no_dimension: bool,
    #[arg(long)]
    pub inline_strings: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub sheets: u32,
    #[arg(long, default_value_t = 6)]
    pub level: u32,
    /// Skip the ground-truth CSV.
    #[arg(long)]
    pub no_truth: bool,
}

impl GenArgs {
    pub fn spec(&self) -> Result<GenSpec, CliError> {
        if let Some(p) = &self.spec {
            let text = std::fs::read(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            return serde_json::from_slice(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())));
        }
        let one = |kind| GenSpec::uniform(self.rows, self.cols, kind);
        let spec = match self.kind {
            GenKind::Numeric => GenSpec::numeric(self.rows, self.cols),
            GenKind::Mixed => GenSpec::mixed(self.rows),
            GenKind::Float => one(ColumnKind::Float),
            GenKind::Integer => one(ColumnKind::Integer),
            GenKind::Text => one(ColumnKind::Text { unique: self.unique }),
            GenKind::Boolean => one(ColumnKind::Boolean),
            GenKind::Date => one(ColumnKind::Date),
        };
        Ok(spec
            .blank(self.blank)
            .refs(!self.no_refs)
            .dimension(!self.no_dimension)
            .inline_strings(self.inline_strings)
            .seed(self.seed)
            .sheets(self.sheets)
            .level(self.level))
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "consecutive,interleaved")]
    pub modes: Vec<Mode>,
    /// Worker counts swept for consecutive and parallel-deflate runs.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub threads: Vec<usize>,
    /// Parser counts swept for interleaved runs.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub parser_threads: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_strings, default_value = "parallel")]
    pub strings: Vec<StringsMode>,
    #[arg(long, value_parser = size_usize, default_value = "1024")]
    pub ring_elements: usize,
    #[arg(long, value_parser = size_usize, default_value = "32KB")]
    pub ring_element_size: usize,
    #[arg(long, default_value_t = crate::bench::harness::DEFAULT_REPEAT)]
    pub repeat: u32,
    /// Memory sampling period in milliseconds.
    #[arg(long, default_value_t = 50)]
    pub sample_ms: u64,
    /// Report CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write every memory sample here.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Record that OS caches were dropped before the run.
    #[arg(long)]
    pub caches_cleared: bool,
    /// Binary to benchmark (default: this one).
    #[arg(long)]
    pub binary: Option<PathBuf>,
}

impl BenchArgs {
    pub fn matrix(&self) -> Vec<BenchConfig> {
        let mut out = Vec::new();
        for file in &self.files {
            let stem = file.file_stem().map_or_else(|| file.display().to_string(), |s| s.to_string_lossy().into_owned());
            for &mode in &self.modes {
                let counts = if mode == Mode::Interleaved {
                    &self.parser_threads
                } else {
                    &self.threads
                };
                for &n in counts {
                    for &strings in &self.strings {
                        let mut c = BenchConfig::new(file, mode);
                        if mode == Mode::Interleaved {
                            c.parser_threads = n;
                        } else {
                            c.threads = n;
                        }
                        c.strings = strings;
                        c.ring_elements = self.ring_elements;
                        c.ring_element_size = self.ring_element_size;
                        c.id = format!("{stem}/{mode}/t{n}/{strings}");
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

#[derive(Args, Debug)]
pub struct RepackArgs {
    pub file: PathBuf,
    /// Repacked workbook; its index goes to `<out>.sridx`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "1")]
    pub sheet: String,
    /// Uncompressed bytes between reset boundaries.
    #[arg(long, value_parser = parse_size, default_value_t = DEFAULT_BOUNDARY_INTERVAL)]
    pub boundary_interval: u64,
    #[arg(long, default_value_t = 6)]
    pub level: u32,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidOptions(_) | Error::NoSuchSheet(_) => CliError::usage(e.to_string()),
            Error::Io(e) if e.kind() == io::ErrorKind::BrokenPipe => e.into(),
            e => CliError::data(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            // A closed reader (`| head`) is not a failure.
            return CliError {
                code: 0,
                message: String::new(),
            };
        }
        CliError::data(e.to_string())
    }
}

fn selector(s: &str) -> SheetSelector {
    s.parse().expect("infallible")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn parse(args: &ParseArgs) -> Result<(), CliError> {
    let mut wb = Workbook::open_with(&args.file, args.verify)?;
    if let Some(p) = &args.index {
        wb = wb.with_index(read_index(p)?);
    }
    let sheet = selector(&args.sheet);
    let options = args.engine.options();
    let mode = args.engine.mode;
    let (frame, phases) = match wb.read_timed(&sheet, mode, &options) {
        Err(e) if e.is_out_of_memory() && mode == Mode::Consecutive && args.fallback => {
            eprintln!("warning: {e}; falling back to interleaved mode");
            wb.read_timed(&sheet, Mode::Interleaved, &options)?
        }
        r => r?,
    };
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match args.output {
        Output::Csv => write_csv(&frame, &mut out)?,
        Output::Summary => write!(out, "{}", frame.summary())?,
    }
    out.flush()?;
    if args.phase_log {
        eprintln!("{}", phase_line(&phases, frame.n_rows() as u64, peak_rss()));
    }
    Ok(())
}

fn info(args: &InfoArgs) -> Result<(), CliError> {
    let wb = Workbook::open(&args.file)?;
    let mut out = io::stdout().lock();
    writeln!(out, "file\t{}", args.file.display())?;
    for (i, s) in wb.meta().sheets.iter().enumerate() {
        let dim = match wb.dimension(&SheetSelector::Index(i + 1))? {
            Some(d) => format!("{} rows x {} cols", d.rows, d.cols),
            None => "no dimension".into(),
        };
        let size = wb.archive().entry(&s.path).map_or(0, |e| e.uncompressed_size);
        writeln!(out, "sheet {}\t{}\t{}\t{dim}\t{size} bytes", i + 1, s.name, s.path)?;
    }
    match wb.shared_strings_count()? {
        Some(n) => writeln!(out, "shared strings\t{n}")?,
        None if wb.meta().shared_strings_path.is_some() => writeln!(out, "shared strings\tunannounced")?,
        None => writeln!(out, "shared strings\tnone")?,
    }
    if let Some(ix) = wb.index() {
        writeln!(out, "boundary index\t{}\t{} boundaries", ix.entry, ix.boundaries.len())?;
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), CliError> {
    let spec = args.spec()?;
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let summary = if args.no_truth {
        let out = create(&args.out)?;
        let (out, mut summary) = generate(&spec, out, Outputs::default())?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        if let Some(e) = crate::archive::Archive::open(&args.out).map_err(Error::from)?.entry("xl/worksheets/sheet1.xml") {
            summary.sheet_compressed_bytes = e.compressed_size;
        }
        summary
    } else {
        generate_xlsx(&spec, &args.out)?.summary
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(io::stdout(), "{json}")?;
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let binary = args
        .binary
        .clone()
        .or_else(locate_binary)
        .ok_or_else(|| CliError::usage("cannot locate the sheetreader binary; pass --binary"))?;
    let mut options = BenchOptions::new(binary);
    options.repeat = args.repeat;
    options.sample_period = Duration::from_millis(args.sample_ms.max(1));
    options.caches_cleared = args.caches_cleared;
    let report = run_benchmark(&args.matrix(), &options);
    match &args.out {
        Some(p) => {
            let mut w = create(p)?;
            emit_report(&report, &mut w)?;
            w.flush()?;
        }
        None => emit_report(&report, io::stdout().lock())?,
    }
    if let Some(p) = &args.samples {
        let mut w = create(p)?;
        emit_samples(&report, &mut w)?;
        w.flush()?;
    }
    for r in report.rows.iter().filter(|r| !r.error.is_empty()) {
        eprintln!("{}: {}", r.config, r.error);
    }
    Ok(())
}

fn repack(args: &RepackArgs) -> Result<(), CliError> {
    let wb = Workbook::open(&args.file)?;
    let sheet = wb.meta().select(&selector(&args.sheet))?;
    let out = create(&args.out)?;
    let (out, index) = repack_entry(wb.archive(), &sheet.path, args.boundary_interval, args.level, out)?;
    out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    let side = sidecar_path(&args.out);
    write_index(&side, &index)?;
    writeln!(
        io::stdout(),
        "{}: {} boundaries over {} bytes; index in {}",
        index.entry,
        index.boundaries.len(),
        index.uncompressed_size,
        side.display()
    )?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Parse(a) => parse(a),
        Command::Info(a) => info(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
        Command::Repack(a) => repack(a),
    }
}

/// Entry point of the `sheetreader` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.code == 0 => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("32768"), Ok(32768));
        assert_eq!(parse_size("32KB"), Ok(32768));
        assert_eq!(parse_size("32k"), Ok(32768));
        assert_eq!(parse_size("4MiB"), Ok(4 << 20));
        assert_eq!(parse_size("1 GB"), Ok(1 << 30));
        assert!(parse_size("12XB").is_err());
        assert!(parse_size("MB").is_err());
    }

    #[test]
    fn defaults_follow_the_engine() {
        let cli = Cli::try_parse_from(["sheetreader", "parse", "f.xlsx"]).unwrap();
        let Command::Parse(a) = cli.command else { panic!() };
        let o = a.engine.options();
        assert_eq!(o.parser_threads, 2);
        assert_eq!((o.ring_elements, o.ring_element_size), (1024, 32768));
        assert_eq!(o.strings, StringsMode::Parallel);
        assert!(a.fallback);
    }

    #[test]
    fn bench_matrix() {
        let cli = Cli::try_parse_from([
            "sheetreader",
            "bench",
            "a.xlsx",
            "--modes",
            "consecutive,interleaved",
            "--threads",
            "1,2,4,8,16",
            "--parser-threads",
            "1,2",
        ])
        .unwrap();
        let Command::Bench(a) = cli.command else { panic!() };
        let m = a.matrix();
        assert_eq!(m.len(), 7);
        assert_eq!(m[0].id, "a/consecutive/t1/parallel");
        assert_eq!(m[6].parser_threads, 2);
    }

    #[test]
    fn bad_mode_is_a_usage_error() {
        let e = Cli::try_parse_from(["sheetreader", "parse", "f.xlsx", "--mode", "sideways"]).unwrap_err();
        assert!(e.use_stderr());
    }
}
