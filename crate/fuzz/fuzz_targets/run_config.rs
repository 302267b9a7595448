#![no_main]

use libfuzzer_sys::fuzz_target;
use oumax::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::from_json_str(text) {
        assert!(config.threads != Some(0));
        let _ = config.ou_params();
    }
});
