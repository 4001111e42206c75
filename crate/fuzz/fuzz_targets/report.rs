#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::sweep::load_report;

// Input is split on the first NUL: results.csv, then history.csv.
fuzz_target!(|data: &[u8]| {
    let mut parts = data.splitn(2, |&b| b == 0);
    let results = parts.next().unwrap_or_default();
    let history = parts.next().unwrap_or_default();
    let dir = std::env::temp_dir().join(format!("opseqids-fuzz-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("results.csv"), results).unwrap();
    std::fs::write(dir.join("history.csv"), history).unwrap();
    let _ = load_report(&dir);
});
