use std::path::Path;
use std::process::{Command, Output};

use sheetreader::bench::gen::{generate_xlsx, GenSpec};
use sheetreader::bench::report::{read_report, REPORT_COLUMNS};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sheetreader")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn parse_prints_the_ground_truth_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_xlsx(&GenSpec::mixed(300).blank(0.1), dir.path().join("m.xlsx")).unwrap();
    let truth = std::fs::read(&g.csv).unwrap();
    let file = s(&g.xlsx);
    assert_eq!(ok(&["parse", file]), truth);
    assert_eq!(ok(&["parse", file, "--mode", "interleaved", "--output", "csv"]), truth);
    assert_eq!(
        ok(&["parse", file, "--mode", "interleaved", "--parser-threads", "3", "--ring-elements", "4", "--ring-element-size", "4KB"]),
        truth
    );
    assert_eq!(ok(&["parse", file, "--threads", "3", "--strings", "sequential", "--verify"]), truth);

    let repacked = dir.path().join("r.xlsx");
    let msg = ok(&["repack", file, "--out", s(&repacked), "--boundary-interval", "16KB"]);
    assert!(String::from_utf8_lossy(&msg).contains("boundaries"));
    assert!(repacked.with_extension("xlsx.sridx").exists());
    assert_eq!(ok(&["parse", s(&repacked), "--mode", "parallel-deflate", "--threads", "4"]), truth);

    let out = dir.path().join("out.csv");
    assert!(ok(&["parse", file, "--out", s(&out)]).is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), truth);
}

#[test]
fn threads_default_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_xlsx(&GenSpec::numeric(50, 3), dir.path().join("n.xlsx")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sheetreader"))
        .args(["parse", s(&g.xlsx)])
        .env("SHEETREADER_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn info_lists_sheets_and_strings() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_xlsx(&GenSpec::mixed(40).sheets(2), dir.path().join("i.xlsx")).unwrap();
    let text = String::from_utf8(ok(&["info", s(&g.xlsx)])).unwrap();
    assert!(text.contains("Sheet1") && text.contains("Sheet2"), "{text}");
    assert!(text.contains("40 rows x 100 cols"), "{text}");
    assert!(text.contains(&format!("shared strings\t{}", g.summary.shared_strings)), "{text}");
}

#[test]
fn gen_writes_workbook_truth_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.xlsx");
    let json = ok(&["gen", s(&out), "--rows", "25", "--cols", "4", "--kind", "text", "--blank", "0.2", "--seed", "9"]);
    let summary: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(summary["rows"], 25);
    assert_eq!(summary["cols"], 4);
    assert!(summary["sheet_compressed_bytes"].as_u64().unwrap() > 0);
    assert_eq!(ok(&["parse", s(&out)]), std::fs::read(out.with_extension("csv")).unwrap());

    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, serde_json::to_vec(&GenSpec::numeric(7, 2)).unwrap()).unwrap();
    let other = dir.path().join("s.xlsx");
    ok(&["gen", s(&other), "--spec", s(&spec), "--no-truth"]);
    assert!(!other.with_extension("csv").exists());
    let summary = String::from_utf8(ok(&["parse", s(&other), "--output", "summary"])).unwrap();
    assert!(summary.starts_with("rows=7 cols=2"), "{summary}");
}

#[test]
fn bench_reports_every_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_xlsx(&GenSpec::numeric(200, 5), dir.path().join("b.xlsx")).unwrap();
    let report = dir.path().join("report.csv");
    let samples = dir.path().join("samples.csv");
    ok(&[
        "bench",
        s(&g.xlsx),
        "--modes",
        "consecutive,interleaved",
        "--threads",
        "1,2",
        "--parser-threads",
        "1",
        "--repeat",
        "2",
        "--sample-ms",
        "5",
        "--out",
        s(&report),
        "--samples",
        s(&samples),
        "--binary",
        env!("CARGO_BIN_EXE_sheetreader"),
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with(&REPORT_COLUMNS.join(",")));
    let rows = read_report(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!((r.repeats, r.rows, r.error.as_str()), (2, 200, ""), "{r:?}");
        assert!(r.wall_ms > 0.0 && r.peak_rss_bytes > 0, "{r:?}");
    }
    assert!(std::fs::read_to_string(samples).unwrap().starts_with("config,elapsed_ms,rss_bytes"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_xlsx(&GenSpec::numeric(5, 2), dir.path().join("e.xlsx")).unwrap();
    let file = s(&g.xlsx);
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["parse"]).status.code(), Some(1));
    assert_eq!(run(&["parse", file, "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(run(&["parse", file, "--sheet", "Nope"]).status.code(), Some(1));
    assert_eq!(run(&["parse", file, "--mode", "parallel-deflate"]).status.code(), Some(1));
    assert_eq!(run(&["parse", s(&dir.path().join("missing.xlsx"))]).status.code(), Some(2));

    let junk = dir.path().join("junk.xlsx");
    std::fs::write(&junk, b"not a zip at all").unwrap();
    let o = run(&["parse", s(&junk)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn memory_shortfall_falls_back_or_fails_with_advice() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_xlsx(&GenSpec::numeric(500, 4), dir.path().join("f.xlsx")).unwrap();
    let truth = std::fs::read(&g.csv).unwrap();
    let file = s(&g.xlsx);
    let o = run(&["parse", file, "--memory-budget", "1KB"]);
    assert!(o.status.success());
    assert_eq!(o.stdout, truth);
    assert!(String::from_utf8_lossy(&o.stderr).contains("interleaved"));

    let o = run(&["parse", file, "--memory-budget", "1KB", "--fallback", "false"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("interleaved"), "{}", String::from_utf8_lossy(&o.stderr));
}
