#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::corpus::{manifest::parse_opcode_text, parse_disassembly};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let parsed = parse_disassembly(&text);
    for m in &parsed.mnemonics {
        assert!(!m.is_empty());
        assert!(!m.chars().any(char::is_whitespace));
    }
    let _ = parse_opcode_text(&text);
});
