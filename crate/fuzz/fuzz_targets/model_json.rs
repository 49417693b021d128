#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::models::ModelSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ModelSpec::from_json_str(s) {
        if m.validate().is_ok() && m.horizon <= 64.0 {
            let _ = locmart::models::sample_path(&m, 0);
            let _ = m.compensator();
        }
    }
});
