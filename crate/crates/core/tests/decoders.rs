//! Replays the fuzz corpus and random mutations of it through the decoders.

use std::path::{Path, PathBuf};

use proptest::prelude::*;
use trgeo::formats::{curve_from_coefficients, decode_immersion, decode_record, immersion_from_json, parse_coefficients};

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

fn coefficients(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = parse_coefficients(text) {
            if t.iter().all(|(n, _)| n.unsigned_abs() <= 4096) {
                let _ = curve_from_coefficients(text, None);
            }
        }
    }
}

fn container(data: &[u8]) {
    if decode_record(data).is_ok() {
        let _ = decode_immersion(data);
    }
}

fn json(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = immersion_from_json(text);
    }
}

#[test]
fn corpus_seeds_decode() {
    let coeffs = corpus("coefficients_json");
    assert!(coeffs.len() >= 5);
    for c in &coeffs {
        coefficients(c);
    }
    let bins = corpus("immersion_container");
    let good = bins.iter().filter(|b| decode_immersion(b).is_ok()).count();
    assert!(good >= 4, "{good}");
    let texts = corpus("immersion_json");
    assert!(texts.iter().all(|t| immersion_from_json(std::str::from_utf8(t).unwrap()).is_ok()));
}

fn mutate(seed: &[u8], edits: &[(usize, u8)], cut: usize) -> Vec<u8> {
    let mut v = seed.to_vec();
    for &(i, b) in edits {
        if !v.is_empty() {
            let k = i % v.len();
            v[k] = b;
        }
    }
    v.truncate(v.len().saturating_sub(cut % 4));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mutated_inputs_never_panic(pick in 0usize..64, edits in prop::collection::vec((any::<usize>(), any::<u8>()), 0..6),
                                  cut in any::<usize>()) {
        let coeffs = corpus("coefficients_json");
        coefficients(&mutate(&coeffs[pick % coeffs.len()], &edits, cut));
        let bins = corpus("immersion_container");
        container(&mutate(&bins[pick % bins.len()], &edits, cut));
        let texts = corpus("immersion_json");
        json(&mutate(&texts[pick % texts.len()], &edits, cut));
    }

    #[test]
    fn arbitrary_bytes_never_panic(data in prop::collection::vec(any::<u8>(), 0..256)) {
        coefficients(&data);
        container(&data);
        json(&data);
    }
}
