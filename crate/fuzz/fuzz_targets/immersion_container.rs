#![no_main]

use libfuzzer_sys::fuzz_target;
use trgeo::formats::{decode_immersion, decode_record, encode_immersion};

fuzz_target!(|data: &[u8]| {
    if decode_record(data).is_err() {
        return;
    }
    if let Ok(im) = decode_immersion(data) {
        let bytes = encode_immersion(&im).unwrap();
        let back = decode_immersion(&bytes).unwrap();
        assert_eq!(back.points(), im.points());
    }
});
