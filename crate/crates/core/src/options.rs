//! Engine selection and tuning knobs.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::error::Error;

/// Default worker count for the consecutive engine.
pub const DEFAULT_THREADS: usize = 8;
/// Default parser count for the interleaved engine.
pub const DEFAULT_PARSER_THREADS: usize = 2;
pub const DEFAULT_RING_ELEMENTS: usize = 1024;
pub const DEFAULT_RING_ELEMENT_SIZE: usize = 32 * 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Inflate the whole worksheet, then parse equal chunks in parallel.
    #[default]
    Consecutive,
    /// Pipeline streaming inflate and parsing through a fixed ring.
    Interleaved,
    /// Independent inflate+parse workers over a repacked entry.
    ParallelDeflate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Consecutive => "consecutive",
            Mode::Interleaved => "interleaved",
            Mode::ParallelDeflate => "parallel-deflate",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "consecutive" => Ok(Mode::Consecutive),
            "interleaved" => Ok(Mode::Interleaved),
            "parallel-deflate" => Ok(Mode::ParallelDeflate),
            other => Err(Error::InvalidOptions(format!("unknown mode {other}"))),
        }
    }
}

/// When the shared-strings part is parsed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StringsMode {
    /// After the worksheet, once its buffers are released.
    Sequential,
    /// Concurrently, by one extra thread that inflates and parses.
    #[default]
    Parallel,
}

impl fmt::Display for StringsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StringsMode::Sequential => "sequential",
            StringsMode::Parallel => "parallel",
        })
    }
}

impl FromStr for StringsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sequential" => Ok(StringsMode::Sequential),
            "parallel" => Ok(StringsMode::Parallel),
            other => Err(Error::InvalidOptions(format!("unknown strings mode {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    /// Chunk workers (consecutive) or segment workers (parallel deflate).
    pub threads: usize,
    /// Ring consumers (interleaved).
    pub parser_threads: usize,
    pub ring_elements: usize,
    pub ring_element_size: usize,
    pub strings: StringsMode,
    /// Use row 1 as column names.
    pub headers: bool,
    /// Tag numbers with built-in date formats as dates.
    pub dates: bool,
    /// Bytes the consecutive engine may hold at once; `None` asks the OS.
    pub memory_budget: Option<u64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            threads: DEFAULT_THREADS,
            parser_threads: DEFAULT_PARSER_THREADS,
            ring_elements: DEFAULT_RING_ELEMENTS,
            ring_element_size: DEFAULT_RING_ELEMENT_SIZE,
            strings: StringsMode::Parallel,
            headers: false,
            dates: true,
            memory_budget: None,
        }
    }
}

impl EngineOptions {
    pub fn threads(mut self, n: usize) -> Self {
        self.threads = n;
        self
    }

    pub fn parser_threads(mut self, n: usize) -> Self {
        self.parser_threads = n;
        self
    }

    pub fn ring(mut self, elements: usize, element_size: usize) -> Self {
        self.ring_elements = elements;
        self.ring_element_size = element_size;
        self
    }

    pub fn strings(mut self, mode: StringsMode) -> Self {
        self.strings = mode;
        self
    }

    pub fn headers(mut self, on: bool) -> Self {
        self.headers = on;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |what: &str| Err(Error::InvalidOptions(format!("{what} must be positive")));
        if self.threads == 0 {
            return bad("threads");
        }
        if self.parser_threads == 0 {
            return bad("parser threads");
        }
        if self.ring_element_size == 0 {
            return bad("ring element size");
        }
        if self.ring_elements < 2 {
            return Err(Error::InvalidOptions("the ring needs at least two elements".into()));
        }
        Ok(())
    }
}

/// Wall time spent per loading stage. Stages of the pipelined engines
/// overlap, so they need not add up to the total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Phases {
    pub decompress: Duration,
    pub parse: Duration,
    pub strings: Duration,
    pub transform: Duration,
    pub total: Duration,
}

impl fmt::Display for Phases {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        write!(
            f,
            "decompress_ms={:.3} parse_ms={:.3} strings_ms={:.3} transform_ms={:.3} wall_ms={:.3}",
            ms(self.decompress),
            ms(self.parse),
            ms(self.strings),
            ms(self.transform),
            ms(self.total)
        )
    }
}
