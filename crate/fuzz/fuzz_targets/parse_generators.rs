#![no_main]

use libfuzzer_sys::fuzz_target;
use tropcrit::problem::parse_generators;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cols) = parse_generators(s) {
        // a well-formed K may still be rejected, but must not panic
        if let Some(n) = cols.first().map(Vec::len) {
            if n <= 8 {
                let _ = tropcrit::SubtorusSpec::from_columns(n, &cols);
            }
        }
    }
});
