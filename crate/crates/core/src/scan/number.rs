//! Streaming number deserialization for `<v>` content.
//!
//! Integers are accumulated in-situ digit by digit. The moment the text turns
//! out to be a floating-point literal the digits seen so far are rendered
//! into a copy buffer and the rest of the literal is appended there, so the
//! final conversion is a correctly rounded whole-string parse.

use std::io::Write;

use super::ScanError;

/// Largest digit count that cannot overflow an `i64` accumulator.
const MAX_INT_DIGITS: u32 = 18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Number {
    Integer(i64),
    Double(f64),
}

#[derive(Clone, Debug, Default)]
pub struct NumberAccumulator {
    negative: bool,
    int: u64,
    digits: u32,
    float: bool,
    buf: Vec<u8>,
}

impl NumberAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn reset(&mut self) {
        self.negative = false;
        self.int = 0;
        self.digits = 0;
        self.float = false;
        self.buf.clear();
    }

    /// Feeds one byte of the literal; returns how many bytes were copied.
    #[inline]
    pub fn push(&mut self, b: u8) -> usize {
        if self.float {
            self.buf.push(b);
            return 1;
        }
        match b {
            b'0'..=b'9' if self.digits < MAX_INT_DIGITS => {
                self.int = self.int * 10 + (b - b'0') as u64;
                self.digits += 1;
                0
            }
            b'-' if self.digits == 0 && !self.negative => {
                self.negative = true;
                0
            }
            b' ' | b'\t' | b'\n' | b'\r' => 0,
            _ => self.switch_to_float(b),
        }
    }

    fn switch_to_float(&mut self, b: u8) -> usize {
        self.float = true;
        self.buf.clear();
        if self.negative {
            self.buf.push(b'-');
        }
        if self.digits > 0 {
            write!(self.buf, "{}", self.int).expect("write to Vec");
        }
        self.buf.push(b);
        self.buf.len()
    }

    /// True when no literal byte has been seen.
    pub fn is_empty(&self) -> bool {
        !self.float && self.digits == 0 && !self.negative
    }

    /// Completes the literal. `Ok(None)` for empty content.
    pub fn finish(&self) -> Result<Option<Number>, ScanError> {
        if self.float {
            return parse_double(trim(&self.buf)).map(|d| Some(Number::Double(d)));
        }
        if self.digits == 0 {
            return if self.negative {
                Err(ScanError::MalformedNumber("-".into()))
            } else {
                Ok(None)
            };
        }
        let v = self.int as i64;
        Ok(Some(Number::Integer(if self.negative { -v } else { v })))
    }
}

fn trim(bytes: &[u8]) -> &[u8] {
    let end = bytes
        .iter()
        .rposition(|b| !b.is_ascii_whitespace())
        .map_or(0, |p| p + 1);
    &bytes[..end]
}

/// Correctly rounded decimal or scientific text to `f64`.
pub fn parse_double(text: &[u8]) -> Result<f64, ScanError> {
    let malformed = || ScanError::MalformedNumber(String::from_utf8_lossy(text).into_owned());
    let s = std::str::from_utf8(text).map_err(|_| malformed())?;
    // Rust also accepts "inf"/"NaN" spellings, which are not numeric cell text.
    if !s.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-')) {
        return Err(malformed());
    }
    s.parse::<f64>().map_err(|_| malformed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(pieces: &[&str]) -> Result<Option<Number>, ScanError> {
        let mut acc = NumberAccumulator::new();
        for p in pieces {
            for &b in p.as_bytes() {
                acc.push(b);
            }
        }
        acc.finish()
    }

    #[test]
    fn literals() {
        assert_eq!(run(&["1.5"]).unwrap(), Some(Number::Double(1.5)));
        assert_eq!(run(&["2.5E2"]).unwrap(), Some(Number::Double(250.0)));
        assert_eq!(run(&["375"]).unwrap(), Some(Number::Integer(375)));
        assert_eq!(run(&["-42"]).unwrap(), Some(Number::Integer(-42)));
        assert_eq!(run(&["-0.25"]).unwrap(), Some(Number::Double(-0.25)));
        assert_eq!(run(&["0"]).unwrap(), Some(Number::Integer(0)));
        assert_eq!(run(&[""]).unwrap(), None);
        assert_eq!(run(&["1e-7"]).unwrap(), Some(Number::Double(1e-7)));
        assert_eq!(run(&[".5"]).unwrap(), Some(Number::Double(0.5)));
    }

    #[test]
    fn long_integers_become_doubles() {
        let big = "123456789012345678901234";
        assert_eq!(run(&[big]).unwrap(), Some(Number::Double(big.parse().unwrap())));
        let max18 = "999999999999999999";
        assert_eq!(run(&[max18]).unwrap(), Some(Number::Integer(999_999_999_999_999_999)));
    }

    #[test]
    fn split_across_windows() {
        assert_eq!(run(&["12", "34"]).unwrap(), Some(Number::Integer(1234)));
        assert_eq!(run(&["3.14", "159"]).unwrap(), run(&["3.14159"]).unwrap());
    }

    #[test]
    fn malformed() {
        assert!(run(&["abc"]).is_err());
        assert!(run(&["1.2.3"]).is_err());
        assert!(run(&["inf"]).is_err());
        assert!(run(&["NaN"]).is_err());
        assert!(run(&["-"]).is_err());
        assert!(run(&["1-2"]).is_err());
    }

    #[test]
    fn copies_only_float_literals() {
        let mut acc = NumberAccumulator::new();
        let copied: usize = b"123456".iter().map(|&b| acc.push(b)).sum();
        assert_eq!(copied, 0);
        acc.reset();
        let copied: usize = b"12.5".iter().map(|&b| acc.push(b)).sum();
        assert_eq!(copied, 4);
    }

    proptest! {
        #[test]
        fn shortest_formatting_round_trips(bits in any::<u64>()) {
            let d = f64::from_bits(bits);
            prop_assume!(d.is_finite());
            for text in [format!("{d}"), format!("{d:e}"), format!("{d:E}")] {
                let mut acc = NumberAccumulator::new();
                for &b in text.as_bytes() {
                    acc.push(b);
                }
                let got = match acc.finish().unwrap().unwrap() {
                    Number::Double(v) => v,
                    Number::Integer(i) => i as f64,
                };
                prop_assert_eq!(got.to_bits() & !(1 << 63), d.to_bits() & !(1 << 63));
                prop_assert_eq!(got == 0.0 || got.is_sign_negative() == d.is_sign_negative(), true);
            }
        }

        #[test]
        fn any_split_matches_whole(v in any::<i64>(), cut in 0usize..24) {
            let text = v.to_string();
            let cut = cut.min(text.len());
            let (a, b) = text.split_at(cut);
            prop_assert_eq!(run(&[a, b]).unwrap(), run(&[&text]).unwrap());
        }
    }
}
