#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sc) = trgeo_cli::parse_scenario(text) {
        // anything accepted must serialize to something that parses again
        let again = serde_json::to_string(&sc).unwrap();
        trgeo_cli::parse_scenario(&again).unwrap();
    }
});
