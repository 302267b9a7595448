#![no_main]

use libfuzzer_sys::fuzz_target;
use oumax::config::parse_theta_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(theta) = parse_theta_list(text) {
        assert!(theta.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
});
