//! In-situ deserialization of row numbers and A1-style cell references.

use super::ScanError;

/// Largest accepted row number; anything at or above `2^31 - 1` is malformed.
pub const MAX_ROW: u32 = i32::MAX as u32 - 1;
/// Column limit of the XLSX format (`XFD`).
pub const MAX_COLUMN: u32 = 16_384;

/// Appends one decimal digit: `acc * 10 + digit`.
#[inline]
pub fn push_decimal(acc: u32, byte: u8) -> Result<u32, ScanError> {
    debug_assert!(byte.is_ascii_digit());
    let next = acc as u64 * 10 + (byte - b'0') as u64;
    if next > MAX_ROW as u64 {
        return Err(ScanError::Overflow("row number"));
    }
    Ok(next as u32)
}

/// Appends one column letter in bijective base 26: `A` is 1, `AA` is 27.
#[inline]
pub fn push_column_letter(acc: u32, byte: u8) -> Result<u32, ScanError> {
    debug_assert!(byte.is_ascii_uppercase());
    let next = acc * 26 + (byte - b'A' + 1) as u32;
    if next > MAX_COLUMN {
        return Err(ScanError::Overflow("column"));
    }
    Ok(next)
}

/// Parses `[A-Z]+[0-9]+` into a 1-based `(row, column)` pair.
pub fn parse_cell_ref(bytes: &[u8]) -> Result<(u32, u32), ScanError> {
    let malformed = || ScanError::MalformedRef(String::from_utf8_lossy(bytes).into_owned());
    let split = bytes
        .iter()
        .position(|b| !b.is_ascii_uppercase())
        .ok_or_else(malformed)?;
    let (letters, digits) = bytes.split_at(split);
    if letters.is_empty() || digits.is_empty() || !digits.iter().all(u8::is_ascii_digit) {
        return Err(malformed());
    }
    let col = letters.iter().try_fold(0, |acc, &b| push_column_letter(acc, b))?;
    let row = digits.iter().try_fold(0, |acc, &b| push_decimal(acc, b))?;
    if row == 0 {
        return Err(malformed());
    }
    Ok((row, col))
}

/// Column letters for a 1-based column number.
pub fn column_name(mut col: u32) -> String {
    let mut out = Vec::with_capacity(3);
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}
