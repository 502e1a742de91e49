use std::collections::BTreeSet;
use std::io::{Cursor, Read};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sheetreader::archive::{Archive, ArchiveError};
use sheetreader::bench::gen::GenSpec;

fn generated() -> (Vec<u8>, Vec<u8>) {
    let mut csv = Vec::new();
    let mut xml = Vec::new();
    let (out, _) = sheetreader::bench::gen::generate(
        &GenSpec::mixed(400).blank(0.1).sheets(2),
        Cursor::new(Vec::new()),
        sheetreader::bench::gen::Outputs {
            csv: Some(&mut csv),
            sheet_xml: Some(&mut xml),
        },
    )
    .unwrap();
    (out.into_inner(), xml)
}

#[test]
fn entry_names_match_a_stock_zip_reader() {
    let (bytes, _) = generated();
    let ours: BTreeSet<String> = Archive::from_bytes(bytes.clone())
        .unwrap()
        .entries()
        .iter()
        .map(|e| e.name.clone())
        .collect();
    let stock = zip::ZipArchive::new(Cursor::new(bytes)).unwrap();
    let theirs: BTreeSet<String> = stock.file_names().map(str::to_string).collect();
    assert_eq!(ours, theirs);
    assert!(ours.contains("xl/worksheets/sheet1.xml"));
    assert!(ours.contains("_rels/.rels"));
}

#[test]
fn contents_match_a_stock_zip_reader() {
    let (bytes, xml) = generated();
    let a = Archive::from_bytes(bytes.clone()).unwrap();
    let mut stock = zip::ZipArchive::new(Cursor::new(bytes)).unwrap();
    for e in a.entries() {
        let mut want = Vec::new();
        stock.by_name(&e.name).unwrap().read_to_end(&mut want).unwrap();
        assert_eq!(a.read_entry_full(&e.name).unwrap(), want, "{}", e.name);
    }
    assert_eq!(a.read_entry_full("xl/worksheets/sheet1.xml").unwrap(), xml);
}

#[test]
fn streaming_concatenates_to_the_full_buffer() {
    let (bytes, _) = generated();
    let a = Archive::from_bytes(bytes).unwrap();
    for e in a.entries() {
        let full = a.read_entry_full(&e.name).unwrap();
        for capacity in [1, 7, 4096, 32768] {
            let mut s = a.open_entry_stream(&e.name).unwrap();
            let mut buf = vec![0u8; capacity];
            let mut got = Vec::with_capacity(full.len());
            let mut finished = s.is_finished();
            while !finished {
                let (n, done) = s.next_chunk(&mut buf).unwrap();
                assert!(done || n == capacity, "{} short step {n}/{capacity}", e.name);
                got.extend_from_slice(&buf[..n]);
                assert_eq!(s.produced(), got.len() as u64);
                finished = done;
            }
            assert!(got == full, "{} capacity {capacity}", e.name);
            assert!(matches!(s.next_chunk(&mut buf), Err(ArchiveError::StreamExhausted)));
        }
    }
}

/// Flipped payload bytes: whenever a stock inflater rejects the stream, so do
/// both of our paths; when it silently decodes something else, the CRC check
/// catches it.
#[test]
fn tampered_payloads_agree_with_a_stock_inflater() {
    let (bytes, _) = generated();
    let name = "xl/worksheets/sheet1.xml";
    let a = Archive::from_bytes(bytes.clone()).unwrap();
    let e = a.entry(name).unwrap().clone();
    let off = a.payload_offset(&e).unwrap() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut rejected, mut silent) = (0, 0);
    for _ in 0..200 {
        let mut t = bytes.clone();
        let at = off + rng.gen_range(0..e.compressed_size as usize);
        t[at] ^= 1 << rng.gen_range(0..8);
        let payload = &t[off..off + e.compressed_size as usize];
        let mut stock_out = Vec::new();
        let stock = flate2::read::DeflateDecoder::new(payload).read_to_end(&mut stock_out);
        let stock_ok = stock.is_ok() && stock_out.len() as u64 == e.uncompressed_size;
        let ours = Archive::from_bytes(t.clone()).unwrap().with_verify(true);
        let full = ours.read_entry_full(name);
        let mut streamed = Ok(());
        let mut s = ours.open_entry_stream(name).unwrap();
        let mut buf = vec![0u8; 4096];
        while !s.is_finished() {
            if let Err(err) = s.next_chunk(&mut buf) {
                streamed = Err(err);
                break;
            }
        }
        if !stock_ok {
            rejected += 1;
            assert!(full.is_err(), "full-buffer path accepted a stream flate2 rejects (byte {at})");
            assert!(streamed.is_err(), "streaming path accepted a stream flate2 rejects (byte {at})");
        } else {
            silent += 1;
            assert!(
                matches!(full, Err(ArchiveError::CrcMismatch { .. })) || full.as_ref().is_ok_and(|v| v[..] == stock_out[..]),
                "byte {at}"
            );
        }
    }
    assert!(rejected > 0 && rejected + silent == 200, "{rejected} {silent}");
}
