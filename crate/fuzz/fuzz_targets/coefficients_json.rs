#![no_main]

use libfuzzer_sys::fuzz_target;
use trgeo::formats::{curve_from_coefficients, parse_coefficients};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(terms) = parse_coefficients(text) else {
        return;
    };
    // large indices are legal but expensive to build
    if terms.iter().all(|(n, _)| n.unsigned_abs() <= 4096) {
        let _ = curve_from_coefficients(text, None);
    }
});
