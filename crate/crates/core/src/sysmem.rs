//! Process and system memory figures from `/proc` (Linux only; other
//! platforms report nothing).

use std::fs;

/// Value of a `kB` field of a `/proc` status-style file, in bytes.
fn kb_field(text: &str, key: &str) -> Option<u64> {
    let line = text.lines().find(|l| l.starts_with(key))?;
    let kb: u64 = line[key.len()..].trim().trim_end_matches("kB").trim().parse().ok()?;
    Some(kb * 1024)
}

/// Memory the kernel considers available for new allocations.
pub fn available_memory() -> Option<u64> {
    kb_field(&fs::read_to_string("/proc/meminfo").ok()?, "MemAvailable:")
}

/// Current resident set size of process `pid`.
pub fn rss_of(pid: u32) -> Option<u64> {
    kb_field(&fs::read_to_string(format!("/proc/{pid}/status")).ok()?, "VmRSS:")
}

/// Peak resident set size of this process.
pub fn peak_rss() -> Option<u64> {
    kb_field(&fs::read_to_string("/proc/self/status").ok()?, "VmHWM:")
}

pub fn current_rss() -> Option<u64> {
    rss_of(std::process::id())
}
