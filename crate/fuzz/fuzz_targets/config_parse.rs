#![no_main]

use beamalign::config::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for parsed in [Scenario::from_toml_str(text), Scenario::from_json_str(text)] {
        if let Ok(s) = parsed {
            s.validate().unwrap();
            let _ = s.system.subcarrier_sets();
            let _ = s.system.noise_var();
        }
    }
});
