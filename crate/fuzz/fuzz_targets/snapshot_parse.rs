#![no_main]

use beamalign::codebook::build_g;
use beamalign::snapshot::Snapshot;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(snap) = Snapshot::from_json(text) {
        if snap.bs.support * snap.ue.support <= 1 << 12 && snap.bs.antennas * snap.ue.antennas <= 1 << 16 {
            let _ = build_g(&snap.bs, &snap.ue);
        }
    }
});
