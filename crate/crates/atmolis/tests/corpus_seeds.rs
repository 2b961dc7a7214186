//! The checked-in fuzz corpus seeds must keep exercising their parsers:
//! every seed either parses cleanly or is rejected with a structured
//! error, never a panic, and the well-formed ones round-trip.

use std::fs;
use std::path::PathBuf;

use atmolis::experiment::load_config;
use atmolis::io;

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut seeds: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("missing corpus dir {}: {e}", dir.display()))
        .map(|entry| {
            let entry = entry.unwrap();
            (
                entry.file_name().into_string().unwrap(),
                fs::read_to_string(entry.path()).unwrap(),
            )
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "empty corpus for {target}");
    seeds
}

#[test]
fn config_seeds() {
    let mut parsed = 0;
    for (name, text) in corpus("fuzz_config") {
        if let Ok(config) = load_config(&text) {
            let _ = config.config_hash();
            parsed += 1;
        } else {
            panic!("config seed {name} must be well-formed");
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn ensemble_seeds() {
    let mut parsed = 0;
    for (_, text) in corpus("fuzz_ensemble") {
        if let Ok(matrix) = io::read_ensemble(&text) {
            let alts: Vec<f64> = (0..matrix.ncols()).map(|c| c as f64).collect();
            let back = io::read_ensemble(&io::write_ensemble(&matrix, &alts)).unwrap();
            assert_eq!(back, matrix);
            parsed += 1;
        }
    }
    assert!(parsed >= 2, "expected at least two valid ensemble seeds");
}

#[test]
fn cross_section_seeds() {
    let seeds = corpus("fuzz_cross_sections");
    // tiny.csv is complete; the truncated real table must be rejected
    // without panicking.
    let mut parsed = 0;
    for (_, text) in &seeds {
        if io::read_cross_sections(text).is_ok() {
            parsed += 1;
        }
    }
    assert!(parsed >= 1);
}

#[test]
fn chain_seeds() {
    let mut parsed = 0;
    for (_, text) in corpus("fuzz_chain_csv") {
        if let Ok((labels, samples)) = io::read_chain_csv(&text) {
            let rewritten = io::write_chain_csv(&labels, &samples).unwrap();
            let (l2, s2) = io::read_chain_csv(&rewritten).unwrap();
            assert_eq!((l2, s2), (labels, samples));
            parsed += 1;
        }
        let _ = io::read_spectrum_csv(&text);
    }
    assert!(parsed >= 3);
}

#[test]
fn key_value_seeds() {
    let mut parsed = 0;
    for (_, text) in corpus("fuzz_key_values") {
        if let Ok(pairs) = io::read_key_values(&text) {
            let _ = io::read_key_values(&io::write_key_values(&pairs)).unwrap();
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}
