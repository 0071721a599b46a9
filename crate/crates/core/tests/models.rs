use std::sync::Arc;

use forcelang::data::{generate_corpus, synthesize_profile, GeneratorConfig, PairedSample, Participant, Provenance};
use forcelang::lang::{cosine, EmbeddingProvider, HashingProvider, MvvMatcher};
use forcelang::models::{
    load_checkpoint_from, save_checkpoint_to, train, ModelError, TrainConfig, TrainedModel, Variant,
};
use forcelang::profile::{ForceProfile, SAMPLES};
use forcelang::signal::{integrate_impulse, profile_to_impulse};
use forcelang::vocab::{phrase_to_text, Direction, Modifier, Phrase};
use proptest::prelude::*;

fn corpus(participants: u32, seed: u64) -> Vec<PairedSample> {
    generate_corpus(&GeneratorConfig { participants, seed, ..GeneratorConfig::default() })
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, ..TrainConfig::default() }
}

fn provider() -> Arc<dyn EmbeddingProvider> {
    Arc::new(HashingProvider::new(0))
}

fn fit(variant: Variant, samples: &[PairedSample], epochs: usize, seed: u64) -> TrainedModel {
    let p = variant.needs_provider().then(provider);
    train(variant, samples, &quick(epochs), seed, p).unwrap().0
}

fn checkpoint_bytes(m: &TrainedModel) -> Vec<u8> {
    let mut out = Vec::new();
    save_checkpoint_to(m, &mut out).unwrap();
    out
}

/// Constant force over the whole 4 s horizon.
fn constant_profile(f: [f64; 3]) -> ForceProfile {
    let t: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
    let n = t.len();
    ForceProfile::new(t, vec![f[0]; n], vec![f[1]; n], vec![f[2]; n]).unwrap()
}

fn sample(id: usize, phrase: Phrase, profile: ForceProfile) -> PairedSample {
    PairedSample {
        id: format!("s{id:03}"),
        participant: 1,
        provenance: Provenance::PhraseToForce,
        phrase,
        profile,
    }
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let data = corpus(1, 5);
    for v in Variant::ALL {
        let a = checkpoint_bytes(&fit(v, &data, 2, 11));
        let b = checkpoint_bytes(&fit(v, &data, 2, 11));
        assert_eq!(a, b, "{v}");
    }
    let a = checkpoint_bytes(&fit(Variant::DaeB, &data, 2, 11));
    let c = checkpoint_bytes(&fit(Variant::DaeB, &data, 2, 12));
    assert_ne!(a, c);
}

#[test]
fn checkpoint_round_trip_preserves_translations() {
    let data = corpus(1, 6);
    let profiles: Vec<&ForceProfile> = data.iter().take(50).map(|s| &s.profile).collect();
    for v in Variant::ALL {
        let model = fit(v, &data, 2, 3);
        let bytes = checkpoint_bytes(&model);
        let loaded = load_checkpoint_from(bytes.as_slice(), None).unwrap();
        assert_eq!(checkpoint_bytes(&loaded), bytes, "{v}");
        for p in &profiles {
            assert_eq!(model.force_to_phrase(p).unwrap(), loaded.force_to_phrase(p).unwrap(), "{v}");
        }
        for phrase in Phrase::all().iter().step_by(7) {
            assert_eq!(model.phrase_to_force(phrase).unwrap(), loaded.phrase_to_force(phrase).unwrap(), "{v}");
        }
    }
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let data = corpus(1, 6);
    let bytes = checkpoint_bytes(&fit(Variant::DaeB, &data, 1, 3));
    let truncated = &bytes[..bytes.len() / 2];
    assert!(matches!(load_checkpoint_from(truncated, None), Err(ModelError::Malformed(_))));

    let text = String::from_utf8(bytes.clone()).unwrap();
    let renamed = text.replacen("\"variant\":\"dae_b\"", "\"variant\":\"dae_x\"", 1);
    assert_ne!(renamed, text);
    assert!(matches!(load_checkpoint_from(renamed.as_bytes(), None), Err(ModelError::Version(_))));

    let relabelled = text.replacen("\"variant\":\"dae_b\"", "\"variant\":\"dmlp_b\"", 1);
    assert!(matches!(load_checkpoint_from(relabelled.as_bytes(), None), Err(ModelError::Malformed(_))));

    let old = text.replacen("\"format_version\":1", "\"format_version\":0", 1);
    assert!(matches!(load_checkpoint_from(old.as_bytes(), None), Err(ModelError::Version(_))));
}

#[test]
fn embedding_checkpoint_needs_a_provider() {
    let data = corpus(1, 6);
    let model = fit(Variant::DmlpS, &data, 1, 3);
    let text = String::from_utf8(checkpoint_bytes(&model)).unwrap();
    let stripped = text.replacen("\"provider\":{\"kind\":\"hashing\",\"seed\":0}", "\"provider\":null", 1);
    assert_ne!(stripped, text);
    assert!(matches!(
        load_checkpoint_from(stripped.as_bytes(), None),
        Err(ModelError::ProviderRequired(Variant::DmlpS))
    ));
    assert!(load_checkpoint_from(stripped.as_bytes(), Some(provider())).is_ok());
}

#[test]
fn svm_knn_recall_is_a_constant_force() {
    let forward = Phrase::new(None, Some(Direction::Forward));
    let data = vec![
        sample(0, forward, constant_profile([0.0, 1.5, 0.0])),
        sample(1, Phrase::new(None, Some(Direction::Up)), constant_profile([0.0, 0.0, 2.0])),
    ];
    let model = fit(Variant::SvmKnn, &data, 1, 0);
    let f = model.phrase_to_force(&forward).unwrap();
    assert_eq!(f.dim(), (3, SAMPLES));
    for i in 0..SAMPLES {
        assert!(f[[0, i]].abs() < 1e-12);
        assert!((f[[1, i]] - 1.5).abs() < 1e-12);
        assert!(f[[2, i]].abs() < 1e-12);
    }
}

#[test]
fn svm_knn_recall_returns_a_stored_impulse() {
    let data = corpus(1, 9);
    let model = fit(Variant::SvmKnn, &data, 1, 0);
    let stored: Vec<[f64; 3]> =
        data.iter().map(|s| profile_to_impulse(&s.profile).unwrap().final_impulse()).collect();
    for phrase in Phrase::all() {
        let j = integrate_impulse(model.phrase_to_force(&phrase).unwrap().view(), 4.0).unwrap().final_impulse();
        assert!(
            stored.iter().any(|s| (0..3).all(|k| (s[k] - j[k]).abs() < 1e-9 * (1.0 + s[k].abs()))),
            "{phrase:?} -> {j:?}"
        );
    }
}

#[test]
fn svm_knn_separates_six_pure_axes() {
    let basics = [
        (Direction::Right, [1.0, 0.0, 0.0]),
        (Direction::Left, [-1.0, 0.0, 0.0]),
        (Direction::Forward, [0.0, 1.0, 0.0]),
        (Direction::Backward, [0.0, -1.0, 0.0]),
        (Direction::Up, [0.0, 0.0, 1.0]),
        (Direction::Down, [0.0, 0.0, -1.0]),
    ];
    let mut data = Vec::new();
    for (d, axis) in basics {
        for k in 0..10 {
            let mag = 0.5 + 0.25 * k as f64;
            let f = axis.map(|a: f64| a * mag);
            data.push(sample(data.len(), Phrase::new(None, Some(d)), constant_profile(f)));
        }
    }
    let model = fit(Variant::SvmKnn, &data, 1, 4);
    for s in &data {
        assert_eq!(model.force_to_phrase(&s.profile).unwrap().direction, s.phrase.direction, "{}", s.id);
    }
}

#[test]
fn every_variant_is_total() {
    let data = corpus(1, 2);
    let zero = ForceProfile::zeros(4.0, 10);
    let spike = ForceProfile::new(vec![0.0, 0.01, 0.02], vec![0.0, 1e4, 0.0], vec![0.0; 3], vec![0.0; 3]).unwrap();
    for v in Variant::ALL {
        let m = fit(v, &data, 1, 1);
        let a = m.force_to_phrase(&zero).unwrap();
        assert_eq!(a, m.force_to_phrase(&zero).unwrap());
        m.force_to_phrase(&spike).unwrap();
        let f = m.phrase_to_force(&Phrase::default()).unwrap();
        assert!(f.iter().all(|x| x.is_finite()), "{v}");
    }
}

#[test]
fn exact_vocabulary_text_bypasses_gating() {
    let data = corpus(1, 2);
    let p = provider();
    let matcher = MvvMatcher::new(p.as_ref()).unwrap();
    for v in [Variant::SvmKnn, Variant::DaeB, Variant::DmlpS] {
        let m = fit(v, &data, 1, 1);
        for phrase in Phrase::all().into_iter().filter(|p| !p.is_empty()) {
            let t = m.translate_text_with(&phrase_to_text(&phrase), p.as_ref(), &matcher, 0.99).unwrap();
            assert_eq!(t.matched.phrase, phrase);
            assert_eq!(t.forces, m.phrase_to_force(&phrase).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saturated_threshold_gives_zero_force(text in ".{0,40}", sigma in 1.0f64..3.0) {
        let m = gating_model();
        let p = provider();
        let t = m.translate_text(&text, p.as_ref(), sigma).unwrap();
        prop_assert!(t.matched.phrase.is_empty());
        prop_assert!(t.forces.iter().all(|&x| x == 0.0));
        prop_assert_eq!(t.forces.dim(), (3, SAMPLES));
    }
}

fn gating_model() -> &'static TrainedModel {
    static MODEL: std::sync::OnceLock<TrainedModel> = std::sync::OnceLock::new();
    MODEL.get_or_init(|| fit(Variant::SvmKnn, &corpus(1, 2), 1, 1))
}

/// 400 pairs, 500 epochs.
#[test]
fn dae_b_learns_directions() {
    let cfg = GeneratorConfig {
        participants: 5,
        phrase_to_force_per_participant: 40,
        force_to_phrase_per_participant: 40,
        seed: 7,
        ..GeneratorConfig::default()
    };
    let data = generate_corpus(&cfg);
    assert_eq!(data.len(), 400);
    let (model, history) = train(Variant::DaeB, &data, &TrainConfig::default(), 7, None).unwrap();
    let ratio = history.last().unwrap().total / history[0].total;
    assert!(ratio <= 0.1, "loss ratio {ratio}");

    let up = Phrase::new(None, Some(Direction::Up));
    let j = model.phrase_to_impulse(&up).unwrap().final_impulse();
    assert!(cosine(&j, &[0.0, 0.0, 1.0]) >= 0.8, "{j:?}");

    let clean = GeneratorConfig { noise: 0.0, ..cfg };
    let forward = Phrase::new(Some(Modifier::Harshly), Some(Direction::Forward));
    let profile = synthesize_profile(&forward, &Participant::neutral(0), &clean, 1);
    assert_eq!(model.force_to_phrase(&profile).unwrap().direction, Some(Direction::Forward));
}
