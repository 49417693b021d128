#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::CadlagPath;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = CadlagPath::from_json_str(s) {
        // anything accepted must survive a round trip and answer queries at its horizon
        let back = CadlagPath::from_json_str(&p.to_json()).expect("re-parse");
        assert_eq!(back, p);
        let _ = p.value_at(p.horizon());
    }
});
