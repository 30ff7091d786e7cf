#![no_main]

use libfuzzer_sys::fuzz_target;
use trgeo::formats::{immersion_from_json, immersion_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(im) = immersion_from_json(text) {
        let again = immersion_to_json(&im).unwrap();
        // decimal round trips may move points by an ulp, so only parsing is required
        let _ = immersion_from_json(&again);
    }
});
