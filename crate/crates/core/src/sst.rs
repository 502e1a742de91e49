//! Loading the shared-strings table: one thread alternately inflates an
//! element of the part and scans it.

use crate::archive::Archive;
use crate::error::Result;
use crate::frame::SharedStrings;
use crate::scan::StringsScanner;

/// Streams `path` through a single element of `element_size` bytes.
pub fn load_shared_strings(a: &Archive, path: &str, element_size: usize) -> Result<SharedStrings> {
    let mut stream = a.open_entry_stream(path)?;
    let mut buf = vec![0u8; element_size.max(1)];
    let mut scanner = StringsScanner::new();
    let mut strings = SharedStrings::new();
    while !stream.is_finished() {
        let (n, _) = stream.next_chunk(&mut buf)?;
        scanner.feed(&buf[..n], &mut strings)?;
    }
    scanner.finish()?;
    Ok(strings)
}

#[cfg(test)]
mod tests {
    use std::io::{Cursor, Write};

    use super::*;
    use crate::bench::zipwrite::{EntryMethod, ZipWriter};

    #[test]
    fn element_size_does_not_matter() {
        let mut xml = String::from(r#"<sst count="300" uniqueCount="300">"#);
        for i in 0..300 {
            xml += &format!("<si><t>s{i} &amp; more</t></si>");
        }
        xml += "</sst>";
        let mut w = ZipWriter::new(Cursor::new(Vec::new()));
        let mut e = w.start_entry("sst.xml", EntryMethod::Deflate).unwrap();
        e.write_all(xml.as_bytes()).unwrap();
        e.finish().unwrap();
        let a = Archive::from_bytes(w.finish().unwrap().into_inner()).unwrap();
        let expected: SharedStrings = (0..300).map(|i| format!("s{i} & more")).collect();
        for size in [1, 7, 4096, 32768] {
            assert_eq!(load_shared_strings(&a, "sst.xml", size).unwrap(), expected);
        }
    }
}
