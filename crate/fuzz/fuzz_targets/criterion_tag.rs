#![no_main]

use libfuzzer_sys::fuzz_target;
use locmart::criteria::CriterionTag;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = s.parse::<CriterionTag>() {
        assert_eq!(t.to_string().parse::<CriterionTag>().expect("re-parse"), t);
    }
});
