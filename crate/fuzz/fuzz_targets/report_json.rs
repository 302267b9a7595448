#![no_main]

use libfuzzer_sys::fuzz_target;
use oumax::maximal::CertificationReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = CertificationReport::from_json(text) {
        // Serializing an accepted report must not fail; non-finite numbers are
        // written as null and need not parse back.
        let _ = report.to_json();
    }
});
