#![no_main]

use libfuzzer_sys::fuzz_target;
use oumax::gaussian::OuParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(params) = OuParams::from_json_str(text) {
        // Accepted parameters are Hurwitz with a finite invariant covariance and
        // survive a round trip through their JSON form.
        assert!(params.spectral_abscissa() < 0.0);
        assert!(params.q_inf().iter().all(|v| v.is_finite()));
        let back = OuParams::from_json_value(&params.to_json_value()).expect("round trip");
        assert_eq!(back.dim(), params.dim());
    }
});
