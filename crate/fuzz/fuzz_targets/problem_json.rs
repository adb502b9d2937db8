#![no_main]

use libfuzzer_sys::fuzz_target;
use tropcrit::ProblemSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = ProblemSpec::from_json(s) {
        ProblemSpec::from_json(&v.to_json()).expect("re-encoded value parses");
    }
});
