#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::sweep::{format_grid, parse_grid};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(g) = parse_grid(text) {
            assert_eq!(parse_grid(&format_grid(&g)).expect("formatted grid parses"), g);
        }
    }
});
