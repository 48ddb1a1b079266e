#![no_main]

use beamalign::trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rx) = trace::decode(data) {
        // Accepted traces re-encode to the same bytes.
        assert_eq!(trace::to_bytes(&rx).unwrap(), data);
    }
});
