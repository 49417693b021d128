#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::lab::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(c) = ExperimentConfig::from_json_str(s) {
        let _ = c.resolve();
        let again = ExperimentConfig::from_json_str(&c.to_json()).expect("re-parse");
        assert_eq!(again.to_json(), c.to_json());
    }
});
