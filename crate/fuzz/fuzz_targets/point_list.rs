#![no_main]

use libfuzzer_sys::fuzz_target;
use oumax::config::parse_point_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_point_list(text) {
        let d = points[0].len();
        assert!(points.iter().all(|p| p.len() == d && p.iter().all(|v| v.is_finite())));
    }
});
