use std::collections::HashSet;
use std::sync::OnceLock;

use forcelang::data::{
    generate_corpus, read_dataset, split_holdout_token, split_random, write_dataset, write_dataset_to,
    GeneratorConfig, HoldoutToken, PairedSample,
};
use forcelang::vocab::{Direction, Modifier};
use proptest::prelude::*;

fn default_corpus() -> &'static [PairedSample] {
    static C: OnceLock<Vec<PairedSample>> = OnceLock::new();
    C.get_or_init(|| generate_corpus(&GeneratorConfig::default()))
}

fn ids(s: &[PairedSample]) -> Vec<&str> {
    let mut v: Vec<&str> = s.iter().map(|s| s.id.as_str()).collect();
    v.sort_unstable();
    v
}

fn all_tokens() -> Vec<HoldoutToken> {
    Modifier::ALL
        .iter()
        .map(|&m| HoldoutToken::Modifier(m))
        .chain(Direction::ALL.iter().map(|&d| HoldoutToken::Direction(d)))
        .collect()
}

#[test]
fn default_corpus_uses_every_token() {
    let c = default_corpus();
    assert_eq!(c.len(), 840);
    assert_eq!(ids(c).into_iter().collect::<HashSet<_>>().len(), 840);
    for t in all_tokens() {
        assert!(c.iter().any(|s| t.matches(s)), "{}", t.as_str());
    }
}

#[test]
fn file_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    write_dataset(default_corpus(), &path).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, default_corpus());
    let mut a = Vec::new();
    write_dataset_to(&mut a, &back).unwrap();
    assert_eq!(a, std::fs::read(&path).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_split_partitions(frac in 0.01f64..0.9, seed in any::<u64>()) {
        let c = default_corpus();
        let (train, test) = split_random(c, frac, seed).unwrap();
        prop_assert_eq!(test.len(), (frac * c.len() as f64).round() as usize);
        let mut joined = ids(&train);
        joined.extend(ids(&test));
        joined.sort_unstable();
        prop_assert_eq!(joined, ids(c));
        let again = split_random(c, frac, seed).unwrap();
        prop_assert_eq!(ids(&again.1), ids(&test));
    }

    #[test]
    fn holdout_split_never_leaks(k in 0usize..30, participants in 1u32..4, seed in 0u64..1000) {
        let c = generate_corpus(&GeneratorConfig { participants, seed, ..GeneratorConfig::default() });
        let token = all_tokens()[k];
        let split = split_holdout_token(&c, token);
        prop_assert!(split.train.iter().all(|s| !token.matches(s)));
        prop_assert!(split.test.iter().all(|s| token.matches(s)));
        prop_assert_eq!(split.token_absent, split.test.is_empty());
        let mut joined = ids(&split.train);
        joined.extend(ids(&split.test));
        joined.sort_unstable();
        prop_assert_eq!(joined, ids(&c));
    }

    #[test]
    fn generated_corpora_round_trip(participants in 1u32..3, seed in any::<u64>(), noise in 0.0f64..0.3) {
        let cfg = GeneratorConfig { participants, seed, noise, ..GeneratorConfig::default() };
        let c = generate_corpus(&cfg);
        prop_assert_eq!(c.len(), participants as usize * 84);
        let mut bytes = Vec::new();
        write_dataset_to(&mut bytes, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, &bytes).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), c);
        prop_assert_eq!(generate_corpus(&cfg), read_dataset(&path).unwrap());
    }
}
