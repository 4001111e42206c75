#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::prep::bundle::parse_codes;
use opseqids::prep::PrepMeta;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = PrepMeta::parse(text);
        if let Ok(codes) = parse_codes(text, 1000) {
            assert!(codes.iter().all(|&c| c <= 1000));
        }
    }
});
