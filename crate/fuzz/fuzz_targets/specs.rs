#![no_main]

use libfuzzer_sys::fuzz_target;
use opseqids::nn::ActivationKind;
use opseqids::prep::LengthSpec;
use opseqids::sweep::DimSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = text.parse::<LengthSpec>();
        let _ = text.parse::<ActivationKind>();
        if let Ok(d) = text.parse::<DimSpec>() {
            assert_eq!(d.to_string().parse::<DimSpec>().expect("formatted spec parses"), d);
        }
    }
});
