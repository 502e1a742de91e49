//! XML character and predefined entity references.

/// Longest entity body kept pending between `&` and `;` (`#x10FFFF`).
pub const MAX_ENTITY: usize = 8;

/// Decodes the body of a `&…;` reference (without `&` and `;`) into `out`.
///
/// Returns false, leaving `out` untouched, for names that are neither a
/// predefined entity nor a valid character reference; callers then keep the
/// raw bytes.
pub fn decode_entity(body: &[u8], out: &mut Vec<u8>) -> bool {
    let byte = match body {
        b"lt" => b'<',
        b"gt" => b'>',
        b"amp" => b'&',
        b"quot" => b'"',
        b"apos" => b'\'',
        [b'#', b'x' | b'X', hex @ ..] => return push_code_point(parse_radix(hex, 16), out),
        [b'#', dec @ ..] => return push_code_point(parse_radix(dec, 10), out),
        _ => return false,
    };
    out.push(byte);
    true
}

fn parse_radix(digits: &[u8], radix: u32) -> Option<u32> {
    if digits.is_empty() {
        return None;
    }
    digits.iter().try_fold(0u32, |acc, &b| {
        let d = (b as char).to_digit(radix)?;
        acc.checked_mul(radix)?.checked_add(d)
    })
}

fn push_code_point(cp: Option<u32>, out: &mut Vec<u8>) -> bool {
    match cp.and_then(char::from_u32) {
        Some(c) => {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            true
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(body: &str) -> Option<Vec<u8>> {
        let mut out = Vec::new();
        decode_entity(body.as_bytes(), &mut out).then_some(out)
    }

    #[test]
    fn predefined() {
        assert_eq!(decode("lt").unwrap(), b"<");
        assert_eq!(decode("gt").unwrap(), b">");
        assert_eq!(decode("amp").unwrap(), b"&");
        assert_eq!(decode("quot").unwrap(), b"\"");
        assert_eq!(decode("apos").unwrap(), b"'");
    }

    #[test]
    fn character_references() {
        assert_eq!(decode("#65").unwrap(), b"A");
        assert_eq!(decode("#x41").unwrap(), b"A");
        assert_eq!(decode("#xE9").unwrap(), "é".as_bytes());
        assert_eq!(decode("#x10FFFF").unwrap(), "\u{10FFFF}".as_bytes());
        assert_eq!(decode("#128512").unwrap(), "😀".as_bytes());
    }

    #[test]
    fn unknown_is_rejected() {
        assert!(decode("nbsp").is_none());
        assert!(decode("#").is_none());
        assert!(decode("#xD800").is_none());
        assert!(decode("#x110000").is_none());
        assert!(decode("#12a").is_none());
        assert!(decode("").is_none());
    }

    /// Character references agree with the code point semantics of Rust's
    /// own `char` conversion for every scalar value sampled.
    #[test]
    fn character_references_match_char_encoding() {
        for cp in (0u32..0x11_0000).step_by(97) {
            let expected = char::from_u32(cp).map(|c| c.to_string().into_bytes());
            assert_eq!(decode(&format!("#{cp}")), expected);
            assert_eq!(decode(&format!("#x{cp:X}")), expected);
        }
    }
}
