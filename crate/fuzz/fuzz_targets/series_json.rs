#![no_main]

use libfuzzer_sys::fuzz_target;
use tropcrit::NovikovSeries;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = NovikovSeries::from_json(s) {
        NovikovSeries::from_json(&v.to_json()).expect("re-encoded value parses");
    }
});
