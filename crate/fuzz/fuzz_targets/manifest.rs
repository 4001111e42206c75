#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::corpus::CorpusManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = CorpusManifest::parse(text) {
            let again = CorpusManifest::parse(&m.to_text()).expect("formatted manifest parses");
            assert_eq!(again.records.len(), m.records.len());
        }
    }
});
