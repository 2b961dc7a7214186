#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(pairs) = atmolis::io::read_key_values(text) {
            let rewritten = atmolis::io::write_key_values(&pairs);
            let _ = atmolis::io::read_key_values(&rewritten).expect("rewrite must parse");
        }
    }
});
