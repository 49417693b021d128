#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::TestFunction;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(f) = s.parse::<TestFunction>() {
        let _ = f.eval(0.5);
        let _ = f.eval(-0.5);
    }
});
