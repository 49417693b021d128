#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::follmer::Statistic;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(g) = s.parse::<Statistic>() {
        assert_eq!(g.to_string().parse::<Statistic>().expect("re-parse"), g);
    }
});
