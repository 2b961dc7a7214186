#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(matrix) = atmolis::io::read_ensemble(text) {
            // Accepted input must survive a write/read cycle unchanged.
            let alts: Vec<f64> = (0..matrix.ncols()).map(|c| c as f64).collect();
            let rewritten = atmolis::io::write_ensemble(&matrix, &alts);
            let back = atmolis::io::read_ensemble(&rewritten).expect("rewrite must parse");
            assert_eq!(back, matrix);
        }
    }
});
