#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((labels, samples)) = atmolis::io::read_chain_csv(text) {
            assert_eq!(labels.len(), samples.ncols());
            let rewritten = atmolis::io::write_chain_csv(&labels, &samples).expect("write");
            let (labels2, samples2) =
                atmolis::io::read_chain_csv(&rewritten).expect("rewrite must parse");
            assert_eq!(labels2, labels);
            assert_eq!(samples2, samples);
        }
        let _ = atmolis::io::read_spectrum_csv(text);
    }
});
