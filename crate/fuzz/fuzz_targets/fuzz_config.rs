#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Parsing and validation must never panic; accepted configs must
        // stay accepted after a serialization round trip.
        if let Ok(config) = atmolis::experiment::load_config(text) {
            let _ = config.config_hash();
            let _ = config.method.selection();
        }
    }
});
