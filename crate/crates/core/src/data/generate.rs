//! Simulated participants for both collection procedures.
//!
//! A demonstration is a half-sine pulse `A sin(pi t / D) u` sampled at a fixed
//! rate; its final impulse is `2 A D / pi * u`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PairedSample, Provenance};
use crate::profile::ForceProfile;
use crate::rng::{derive_path, derive_seed, rng_from};
use crate::vocab::{Direction, Modifier, Phrase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeClass {
    Soft,
    Neutral,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationClass {
    Fast,
    Neutral,
    Slow,
}

/// Magnitude multipliers (of `base_magnitude`) and durations in seconds per
/// class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierBands {
    pub base_magnitude: f64,
    pub soft: (f64, f64),
    pub neutral_magnitude: (f64, f64),
    pub strong: (f64, f64),
    pub fast: (f64, f64),
    pub neutral_duration: (f64, f64),
    pub slow: (f64, f64),
}

impl Default for ModifierBands {
    fn default() -> Self {
        Self {
            base_magnitude: 6.0,
            soft: (0.3, 0.6),
            neutral_magnitude: (0.6, 1.0),
            strong: (1.0, 1.6),
            fast: (1.0, 1.8),
            neutral_duration: (1.8, 3.0),
            slow: (3.0, 4.0),
        }
    }
}

impl ModifierBands {
    pub fn magnitude_class(m: Option<Modifier>) -> MagnitudeClass {
        use Modifier::*;
        match m {
            Some(Slightly | Lightly | Softly | Smoothly) => MagnitudeClass::Soft,
            None | Some(Gradually | Slowly) => MagnitudeClass::Neutral,
            Some(Greatly | Significantly | Harshly | Sharply | Quickly | Immediately) => {
                MagnitudeClass::Strong
            }
        }
    }

    pub fn duration_class(m: Option<Modifier>) -> DurationClass {
        use Modifier::*;
        match m {
            Some(Quickly | Immediately | Sharply) => DurationClass::Fast,
            Some(Slowly | Gradually | Smoothly) => DurationClass::Slow,
            _ => DurationClass::Neutral,
        }
    }

    fn magnitude_band(&self, c: MagnitudeClass) -> (f64, f64) {
        match c {
            MagnitudeClass::Soft => self.soft,
            MagnitudeClass::Neutral => self.neutral_magnitude,
            MagnitudeClass::Strong => self.strong,
        }
    }

    fn duration_band(&self, c: DurationClass) -> (f64, f64) {
        match c {
            DurationClass::Fast => self.fast,
            DurationClass::Neutral => self.neutral_duration,
            DurationClass::Slow => self.slow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub participants: u32,
    pub phrase_to_force_per_participant: usize,
    pub force_to_phrase_per_participant: usize,
    /// Direction and amplitude jitter, as a fraction.
    pub noise: f64,
    /// Force-to-phrase pulse amplitude range, Newtons.
    pub magnitude_range: (f64, f64),
    /// Force-to-phrase pulse duration range, seconds.
    pub duration_range: (f64, f64),
    pub bands: ModifierBands,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            participants: 10,
            phrase_to_force_per_participant: 42,
            force_to_phrase_per_participant: 42,
            noise: 0.1,
            magnitude_range: (0.5, 15.0),
            duration_range: (1.0, 4.0),
            bands: ModifierBands::default(),
            sample_rate_hz: 100.0,
            seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let (mlo, mhi) = self.magnitude_range;
        let (dlo, dhi) = self.duration_range;
        if self.participants == 0 {
            return Err("participants must be at least 1".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(format!("noise must be a non-negative number, got {}", self.noise));
        }
        if !(mlo > 0.0 && mlo <= mhi && mhi.is_finite()) {
            return Err(format!("bad magnitude range {mlo}..{mhi}"));
        }
        if !(dlo > 0.0 && dlo <= dhi && dhi <= 4.0) {
            return Err(format!("bad duration range {dlo}..{dhi} (must lie in (0, 4])"));
        }
        if !(self.sample_rate_hz >= 1.0 && self.sample_rate_hz.is_finite()) {
            return Err(format!("bad sample rate {}", self.sample_rate_hz));
        }
        let b = &self.bands;
        for (lo, hi) in [b.fast, b.neutral_duration, b.slow] {
            if !(lo > 0.0 && lo <= hi && hi <= 4.0) {
                return Err(format!("bad duration band {lo}..{hi}"));
            }
        }
        for (lo, hi) in [b.soft, b.neutral_magnitude, b.strong] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(format!("bad magnitude band {lo}..{hi}"));
            }
        }
        if !(b.base_magnitude > 0.0) {
            return Err("base magnitude must be positive".into());
        }
        Ok(())
    }
}

/// Per-participant habits: how hard they push, a fixed angular bias, and
/// personal shifts of the magnitude/duration class boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: u32,
    pub strength: f64,
    /// Rotation axis (unit) and angle in radians.
    pub bias_axis: [f64; 3],
    pub bias_angle: f64,
    /// Relative shifts of the soft/strong and fast/slow boundaries.
    pub threshold_bias: [f64; 4],
}

impl Participant {
    pub fn neutral(id: u32) -> Self {
        Self { id, strength: 1.0, bias_axis: [0.0, 0.0, 1.0], bias_angle: 0.0, threshold_bias: [0.0; 4] }
    }

    pub fn sample(id: u32, rng: &mut ChaCha8Rng) -> Self {
        let strength = rng.gen_range(0.7..=1.3);
        let bias_axis = unit(random_gaussian3(rng)).unwrap_or([0.0, 0.0, 1.0]);
        let bias_angle = rng.gen_range(0.0..=10f64.to_radians());
        let threshold_bias = [(); 4].map(|_| rng.gen_range(-0.1..=0.1));
        Self { id, strength, bias_axis, bias_angle, threshold_bias }
    }

    /// Apply the participant's angular bias (Rodrigues rotation).
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        rotate(v, self.bias_axis, self.bias_angle)
    }

    fn unrotate(&self, v: [f64; 3]) -> [f64; 3] {
        rotate(v, self.bias_axis, -self.bias_angle)
    }
}

fn rotate(v: [f64; 3], k: [f64; 3], angle: f64) -> [f64; 3] {
    if angle == 0.0 {
        return v;
    }
    let (s, c) = angle.sin_cos();
    let kxv = cross(k, v);
    let kdv = dot(k, v);
    [0, 1, 2].map(|i| v[i] * c + kxv[i] * s + k[i] * kdv * (1.0 - c))
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot(v, v).sqrt();
    (n > 0.0).then(|| v.map(|x| x / n))
}

fn random_gaussian3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [(); 3].map(|_| StandardNormal.sample(rng))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Direction perturbed by zero-mean isotropic noise of scale `noise`.
fn jitter(u: [f64; 3], noise: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    if noise == 0.0 {
        return u;
    }
    let g = random_gaussian3(rng);
    let s = noise / 3f64.sqrt();
    unit([u[0] + s * g[0], u[1] + s * g[1], u[2] + s * g[2]]).unwrap_or(u)
}

/// Half-sine pulse sampled at `rate` Hz. `duration` is snapped to the sample
/// grid so the last sample lands on the pulse end.
fn half_sine(amplitude: f64, duration: f64, u: [f64; 3], rate: f64) -> ForceProfile {
    let steps = ((duration * rate).round() as usize).max(1);
    let d = steps as f64 / rate;
    let timestamps: Vec<f64> = (0..=steps).map(|i| i as f64 / rate).collect();
    let shape: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { 0.0 } else { amplitude * (PI * i as f64 / steps as f64).sin() })
        .collect();
    let axis = |k: usize| shape.iter().map(|s| s * u[k]).collect::<Vec<f64>>();
    debug_assert!(d > 0.0);
    ForceProfile::new(timestamps, axis(0), axis(1), axis(2)).expect("valid pulse")
}

/// Demonstrate `phrase` as participant `user`. Deterministic in its inputs.
pub fn synthesize_profile(phrase: &Phrase, user: &Participant, cfg: &GeneratorConfig, seed: u64) -> ForceProfile {
    let Some(direction) = phrase.direction else {
        return ForceProfile::zeros(1.0, cfg.sample_rate_hz as usize + 1);
    };
    let mut rng = rng_from(seed);
    let bands = &cfg.bands;
    let mag = uniform(&mut rng, bands.magnitude_band(ModifierBands::magnitude_class(phrase.modifier)));
    let dur = uniform(&mut rng, bands.duration_band(ModifierBands::duration_class(phrase.modifier)));
    let u = jitter(user.rotate(direction.unit_vector()), cfg.noise, &mut rng);
    let gain: f64 = if cfg.noise == 0.0 {
        1.0
    } else {
        let g: f64 = StandardNormal.sample(&mut rng);
        (1.0 + cfg.noise * g).max(0.2)
    };
    let amplitude = bands.base_magnitude * mag * user.strength * gain;
    half_sine(amplitude, dur.min(4.0), u, cfg.sample_rate_hz)
}

fn candidates(mag: MagnitudeClass, dur: DurationClass) -> Vec<Option<Modifier>> {
    let options = || Modifier::ALL.iter().copied().map(Some).chain([None]);
    let exact: Vec<_> = options()
        .filter(|&m| ModifierBands::magnitude_class(m) == mag && ModifierBands::duration_class(m) == dur)
        .collect();
    if !exact.is_empty() {
        return exact;
    }
    let by_duration: Vec<_> = options()
        .filter(|&m| m.is_some() && ModifierBands::duration_class(m) == dur)
        .collect();
    if !by_duration.is_empty() && dur != DurationClass::Neutral {
        return by_duration;
    }
    options().filter(|&m| m.is_some() && ModifierBands::magnitude_class(m) == mag).collect()
}

/// Describe a felt force as participant `user`: the direction whose unit vector
/// best matches the (perceived) final impulse, and a modifier obtained by
/// inverting the magnitude and duration bands at the participant's personal
/// class boundaries.
pub fn synthesize_description(
    profile: &ForceProfile,
    user: &Participant,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Phrase {
    let j = profile.final_impulse();
    if dot(j, j) == 0.0 {
        return Phrase::EMPTY;
    }
    let perceived = user.unrotate(j);
    let mut best = Direction::ALL[0];
    let mut best_cos = f64::NEG_INFINITY;
    let norm = dot(perceived, perceived).sqrt();
    for &d in Direction::ALL.iter() {
        let c = dot(perceived, d.unit_vector()) / norm;
        if c > best_cos {
            best = d;
            best_cos = c;
        }
    }

    let b = &cfg.bands;
    let t = user.threshold_bias;
    let relative = profile.peak_force() / (b.base_magnitude * user.strength);
    let mag = if relative < b.soft.1 * (1.0 + t[0]) {
        MagnitudeClass::Soft
    } else if relative > b.strong.0 * (1.0 + t[1]) {
        MagnitudeClass::Strong
    } else {
        MagnitudeClass::Neutral
    };
    let duration = profile.duration();
    let dur = if duration < b.fast.1 * (1.0 + t[2]) {
        DurationClass::Fast
    } else if duration > b.slow.0 * (1.0 + t[3]) {
        DurationClass::Slow
    } else {
        DurationClass::Neutral
    };
    let options = candidates(mag, dur);
    let mut rng = rng_from(seed);
    let modifier = *options.choose(&mut rng).expect("every class pair has candidates");
    Phrase::new(modifier, Some(best))
}

const STREAM_PARTICIPANT: u64 = 1;
const STREAM_P2F: u64 = 2;
const STREAM_F2P: u64 = 3;

fn participant_samples(cfg: &GeneratorConfig, pid: u32) -> Vec<PairedSample> {
    let base = derive_seed(cfg.seed, pid as u64);
    let user = Participant::sample(pid, &mut rng_from(derive_seed(base, STREAM_PARTICIPANT)));
    let mut out = Vec::new();

    // Phrase-to-force: six basic directions in random order, then distinct
    // random combinations of the remaining phrases.
    let mut rng = rng_from(derive_seed(base, STREAM_P2F));
    let mut basics = Direction::BASIC.to_vec();
    basics.shuffle(&mut rng);
    let mut rest: Vec<Phrase> = Modifier::ALL
        .iter()
        .copied()
        .map(Some)
        .chain([None])
        .flat_map(|m| Direction::ALL.iter().map(move |&d| Phrase::new(m, Some(d))))
        .filter(|p| !(p.modifier.is_none() && p.direction.is_some_and(Direction::is_basic)))
        .collect();
    rest.shuffle(&mut rng);
    let phrases = basics
        .into_iter()
        .map(|d| Phrase::new(None, Some(d)))
        .chain(rest)
        .take(cfg.phrase_to_force_per_participant);
    for (k, phrase) in phrases.enumerate() {
        let seed = derive_path(base, &[STREAM_P2F, k as u64 + 1]);
        out.push(PairedSample {
            id: format!("p{pid:02}-p2f-{k:03}"),
            participant: pid,
            provenance: Provenance::PhraseToForce,
            phrase,
            profile: synthesize_profile(&phrase, &user, cfg, seed),
        });
    }

    // Force-to-phrase: random pulses, described by the participant.
    for k in 0..cfg.force_to_phrase_per_participant {
        let mut rng = rng_from(derive_path(base, &[STREAM_F2P, k as u64 + 1]));
        let d = Direction::ALL[rng.gen_range(0..Direction::ALL.len())];
        let u = jitter(d.unit_vector(), cfg.noise, &mut rng);
        let amplitude = uniform(&mut rng, cfg.magnitude_range);
        let (dlo, dhi) = cfg.duration_range;
        let duration = uniform(&mut rng, (dlo, dhi));
        // Snap inside the range so the sampled pulse stays within it.
        let steps = (duration * cfg.sample_rate_hz)
            .round()
            .clamp((dlo * cfg.sample_rate_hz).ceil(), (dhi * cfg.sample_rate_hz).floor());
        let profile = half_sine(amplitude, steps / cfg.sample_rate_hz, u, cfg.sample_rate_hz);
        let phrase = synthesize_description(&profile, &user, cfg, rng.gen());
        out.push(PairedSample {
            id: format!("p{pid:02}-f2p-{k:03}"),
            participant: pid,
            provenance: Provenance::ForceToPhrase,
            phrase,
            profile,
        });
    }
    out
}

/// Full corpus, participants in order `1..=participants`.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Vec<PairedSample> {
    (1..=cfg.participants)
        .into_par_iter()
        .map(|pid| participant_samples(cfg, pid))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
