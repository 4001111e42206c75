#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::lstm::network::{checkpoint_text, parse_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(net) = parse_checkpoint(text) {
            let again = parse_checkpoint(&checkpoint_text(&net)).expect("formatted checkpoint parses");
            assert_eq!(checkpoint_text(&again), checkpoint_text(&net));
        }
    }
});
