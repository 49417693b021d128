#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::stopping::{StoppingFamily, StoppingRule};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = s.parse::<StoppingRule>() {
        assert_eq!(r.to_string().parse::<StoppingRule>().expect("re-parse"), r);
    }
    let _ = StoppingFamily::parse(s, 10.0);
});
