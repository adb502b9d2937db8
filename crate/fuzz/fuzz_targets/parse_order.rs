#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(q) = tropcrit::problem::parse_order(s) {
        assert!(q > tropcrit::rational::int(0));
    }
});
