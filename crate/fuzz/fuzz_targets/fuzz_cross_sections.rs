#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((wavelengths, table)) = atmolis::io::read_cross_sections(text) {
            assert_eq!(wavelengths.len(), table.nrows());
            let w = nalgebra::DVector::from_vec(wavelengths);
            let rewritten = atmolis::io::write_cross_sections(&w, &table);
            let (_, back) = atmolis::io::read_cross_sections(&rewritten).expect("rewrite");
            assert_eq!(back, table);
        }
    }
});
