use std::path::PathBuf;

use forcelang::lang::{
    cosine, decode_binary, encode_binary, nearest_mvv, EmbeddingProvider, HashingProvider, TableProvider,
};
use forcelang::vocab::{phrase_to_text, required_texts, Phrase};
use proptest::prelude::*;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hashing_seed0.tsv")
}

#[test]
fn fixture_table_matches_hashing_provider() {
    let table = TableProvider::from_path(fixture()).unwrap();
    let hashing = HashingProvider::new(0);
    let texts = required_texts();
    assert_eq!(table.len(), texts.len());
    for t in &texts {
        let a = table.embed(t).unwrap();
        let b = hashing.embed(t).unwrap();
        let norm: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        // 8 printed decimals
        let worst = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-7, "{t:?}: {worst}");
    }
}

#[test]
fn self_match_under_both_providers() {
    let table = TableProvider::from_path(fixture()).unwrap();
    let providers: [&dyn EmbeddingProvider; 2] = [&HashingProvider::new(0), &table];
    for provider in providers {
        for p in Phrase::all() {
            let text = phrase_to_text(&p);
            let e = provider.embed(&text).unwrap();
            assert!((cosine(e.as_slice(), e.as_slice()) - 1.0).abs() < 1e-12);
            if !p.is_empty() {
                assert_eq!(nearest_mvv(&text, provider, 0.6).unwrap(), p);
            }
        }
    }
}

#[test]
fn table_rejects_unknown_text() {
    let table = TableProvider::from_path(fixture()).unwrap();
    assert!(table.embed("I like apples").is_err());
    assert!(nearest_mvv("I like apples", &table, 0.6).is_err());
}

#[test]
fn hashing_pairs_are_nearly_orthogonal() {
    let p = HashingProvider::new(17);
    let total: f64 = (0..1000)
        .map(|i| {
            let a = p.embed(&format!("text {i}")).unwrap();
            let b = p.embed(&format!("other {i}")).unwrap();
            cosine(a.as_slice(), b.as_slice()).abs()
        })
        .sum();
    // E|cos| for random unit vectors in 768 dims is about sqrt(2 / (pi 768)) = 0.029
    assert!(total / 1000.0 < 0.05);
}

proptest! {
    #[test]
    fn codec_invariants(k in 0usize..247) {
        let p = Phrase::all()[k];
        let v = encode_binary(&p);
        prop_assert_eq!(v.bits().iter().filter(|&&b| b == 1).count(), 2);
        prop_assert_eq!(decode_binary(&v.to_f64()).unwrap(), p);
    }

    #[test]
    fn saturated_threshold_matches_nothing(text in ".{0,30}", sigma in 1.0f64..5.0, seed in 0u64..4) {
        let p = HashingProvider::new(seed);
        prop_assert!(nearest_mvv(&text, &p, sigma).unwrap().is_empty());
    }

    #[test]
    fn embeddings_are_unit(text in ".{0,30}") {
        let e = HashingProvider::new(0).embed(&text).unwrap();
        let n: f64 = e.as_slice().iter().map(|x| x * x).sum();
        prop_assert!((n - 1.0).abs() < 1e-6);
    }
}
