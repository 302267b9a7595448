#![no_main]

use libfuzzer_sys::fuzz_target;
use oumax::maximal::PolyRegion;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(region) = text.parse::<PolyRegion>() {
        assert_eq!(region.as_str(), text);
    }
});
