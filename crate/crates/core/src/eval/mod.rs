//! Metrics, the three evaluation protocols, and CSV reports.

mod metrics;
mod report;

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{split_holdout_token, split_random, DataError, HoldoutToken, PairedSample};
use crate::lang::{EmbeddingProvider, LangError};
use crate::models::{train, ModelError, TrainConfig, TrainedModel, Variant};
use crate::profile::HORIZON_S;
use crate::rng::derive_path;
use crate::signal::{integrate_impulse, resample_default, SignalError};
use crate::vocab::{Direction, Modifier};

pub use metrics::{dir_sim, fd_acc, fp_acc, mod_sim, phrase_sim, slot_sim, word_sim, FdAcc};
pub use report::{emit_report, parse_report_csv, write_report_csv, ReportRow, CSV_HEADER};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: prediction {pred:?} vs truth {truth:?}")]
    Shape { pred: (usize, usize), truth: (usize, usize) },
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("corpus has {0} samples; at least 20 are needed")]
    CorpusTooSmall(usize),
    #[error("held-out token {token:?} leaked into the training split")]
    Leak { token: String },
    #[error("split does not partition the corpus for token {token:?}")]
    NotAPartition { token: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed report line {line}: {reason}")]
    MalformedReport { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    FpAcc,
    FdAcc,
    ModSim,
    DirSim,
    PhraseSim,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::FpAcc, Metric::FdAcc, Metric::ModSim, Metric::DirSim, Metric::PhraseSim];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::FpAcc => "fp_acc",
            Metric::FdAcc => "fd_acc",
            Metric::ModSim => "mod_sim",
            Metric::DirSim => "dir_sim",
            Metric::PhraseSim => "phrase_sim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    InDistribution,
    OodModifiers,
    OodDirections,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::InDistribution => "in_dist",
            Protocol::OodModifiers => "ood_mod",
            Protocol::OodDirections => "ood_dir",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_dist" => Ok(Protocol::InDistribution),
            "ood_mod" => Ok(Protocol::OodModifiers),
            "ood_dir" => Ok(Protocol::OodDirections),
            other => Err(format!("unknown protocol {other:?} (expected in_dist, ood_mod or ood_dir)")),
        }
    }
}

/// Per-sample scores of one model on one test set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleScores {
    pub fp_acc: Vec<f64>,
    pub fd_acc: Vec<f64>,
    pub mod_sim: Vec<f64>,
    pub dir_sim: Vec<f64>,
    pub phrase_sim: Vec<f64>,
    /// Samples whose FDAcc hit a zero impulse.
    pub degenerate_fd: usize,
}

impl SampleScores {
    pub fn values(&self, m: Metric) -> &[f64] {
        match m {
            Metric::FpAcc => &self.fp_acc,
            Metric::FdAcc => &self.fd_acc,
            Metric::ModSim => &self.mod_sim,
            Metric::DirSim => &self.dir_sim,
            Metric::PhraseSim => &self.phrase_sim,
        }
    }

    pub fn mean(&self, m: Metric) -> f64 {
        mean(self.values(m))
    }

    pub fn len(&self) -> usize {
        self.fp_acc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fp_acc.is_empty()
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Score both translation directions on every test sample. Force outputs are
/// compared with the resampled ground truth in Newtons.
pub fn score_model(
    model: &TrainedModel,
    test: &[PairedSample],
    provider: &dyn EmbeddingProvider,
) -> Result<SampleScores, EvalError> {
    let mut s = SampleScores::default();
    for sample in test {
        let truth = resample_default(&sample.profile)?;
        let pred = model.phrase_to_force(&sample.phrase)?;
        s.fp_acc.push(fp_acc(pred.view(), truth.view())?);
        let jp = integrate_impulse(pred.view(), HORIZON_S)?.final_impulse();
        let jt = integrate_impulse(truth.view(), HORIZON_S)?.final_impulse();
        let fd = fd_acc(jp, jt);
        s.degenerate_fd += fd.degenerate as usize;
        s.fd_acc.push(fd.value);

        let phrase = model.force_to_phrase(&sample.profile)?;
        let m = mod_sim(phrase.modifier, sample.phrase.modifier, provider)?;
        let d = dir_sim(phrase.direction, sample.phrase.direction, provider)?;
        s.mod_sim.push(m);
        s.dir_sim.push(d);
        s.phrase_sim.push(phrase_sim(m, d));
    }
    Ok(s)
}

/// Shared inputs of every protocol.
#[derive(Clone)]
pub struct EvalOptions {
    pub config: TrainConfig,
    /// Used for word similarities and by the embedding variants.
    pub provider: Arc<dyn EmbeddingProvider>,
}

/// Outcome of one round (a trial or one held-out token) for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub scope: String,
    pub variant: Variant,
    pub train_size: usize,
    pub test_size: usize,
    pub scores: SampleScores,
    pub flags: Vec<String>,
}

/// All rounds of one protocol run, in a fixed order (scope-major, then the
/// requested variant order).
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub protocol: Protocol,
    pub variants: Vec<Variant>,
    pub rounds: Vec<RoundResult>,
}

/// Small held-out sides get flagged.
pub const SMALL_SAMPLE: usize = 5;

impl Report {
    pub fn rounds_for(&self, v: Variant) -> impl Iterator<Item = &RoundResult> {
        self.rounds.iter().filter(move |r| r.variant == v && !r.scores.is_empty())
    }

    /// Mean and sd across rounds of the per-round means, plus the round count.
    pub fn aggregate(&self, v: Variant, m: Metric) -> (f64, f64, usize) {
        let per_round: Vec<f64> = self.rounds_for(v).map(|r| r.scores.mean(m)).collect();
        (mean(&per_round), sd(&per_round), per_round.len())
    }
}

const STREAM_IN_DIST: u64 = 11;
const STREAM_OOD_MOD: u64 = 12;
const STREAM_OOD_DIR: u64 = 13;

fn run_round(
    variant: Variant,
    scope: String,
    train_set: &[PairedSample],
    test_set: &[PairedSample],
    seed: u64,
    opts: &EvalOptions,
    mut flags: Vec<String>,
) -> Result<RoundResult, EvalError> {
    let scores = if test_set.is_empty() || train_set.is_empty() {
        SampleScores::default()
    } else {
        let provider = variant.needs_provider().then(|| opts.provider.clone());
        let (model, _) = train(variant, train_set, &opts.config, seed, provider)?;
        score_model(&model, test_set, opts.provider.as_ref())?
    };
    if !test_set.is_empty() && test_set.len() < SMALL_SAMPLE {
        flags.push("small_sample".into());
    }
    if scores.degenerate_fd > 0 {
        flags.push(format!("degenerate_fd={}", scores.degenerate_fd));
    }
    log::info!("{scope} {variant}: {} train / {} test, seed {seed}", train_set.len(), test_set.len());
    Ok(RoundResult { scope, variant, train_size: train_set.len(), test_size: test_set.len(), scores, flags })
}

/// Repeated random 90/10 splits; every variant sees the same split and seed
/// within a trial.
pub fn run_in_distribution(
    corpus: &[PairedSample],
    variants: &[Variant],
    trials: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Report, EvalError> {
    if corpus.len() < 20 {
        return Err(EvalError::CorpusTooSmall(corpus.len()));
    }
    let splits = (0..trials)
        .map(|t| split_random(corpus, 0.1, derive_path(seed, &[STREAM_IN_DIST, t as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, Variant)> =
        (0..trials).flat_map(|t| variants.iter().map(move |&v| (t, v))).collect();
    let rounds = jobs
        .par_iter()
        .map(|&(t, v)| {
            let (train_set, test_set) = &splits[t];
            let train_seed = derive_path(seed, &[STREAM_IN_DIST, t as u64, 1]);
            run_round(v, format!("trial-{t}"), train_set, test_set, train_seed, opts, vec![])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report { protocol: Protocol::InDistribution, variants: variants.to_vec(), rounds })
}

/// Check that a holdout split is clean and exhaustive.
pub fn check_holdout(
    corpus: &[PairedSample],
    token: HoldoutToken,
    train_set: &[PairedSample],
    test_set: &[PairedSample],
) -> Result<(), EvalError> {
    let name = token.as_str().to_string();
    if train_set.iter().any(|s| token.matches(s)) {
        return Err(EvalError::Leak { token: name });
    }
    if !test_set.iter().all(|s| token.matches(s)) || train_set.len() + test_set.len() != corpus.len() {
        return Err(EvalError::NotAPartition { token: name });
    }
    let mut ids: Vec<&str> = train_set.iter().chain(test_set).map(|s| s.id.as_str()).collect();
    let mut all: Vec<&str> = corpus.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    all.sort_unstable();
    if ids != all {
        return Err(EvalError::NotAPartition { token: name });
    }
    Ok(())
}

fn run_holdout(
    protocol: Protocol,
    corpus: &[PairedSample],
    variants: &[Variant],
    tokens: Vec<HoldoutToken>,
    stream: u64,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Report, EvalError> {
    let mut splits = Vec::with_capacity(tokens.len());
    for &token in &tokens {
        let split = split_holdout_token(corpus, token);
        check_holdout(corpus, token, &split.train, &split.test)?;
        splits.push(split);
    }
    let jobs: Vec<(usize, Variant)> =
        (0..tokens.len()).flat_map(|k| variants.iter().map(move |&v| (k, v))).collect();
    let rounds = jobs
        .par_iter()
        .map(|&(k, v)| {
            let split = &splits[k];
            let flags = if split.token_absent { vec!["absent".to_string()] } else { vec![] };
            let train_seed = derive_path(seed, &[stream, k as u64]);
            run_round(v, tokens[k].as_str().to_string(), &split.train, &split.test, train_seed, opts, flags)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report { protocol, variants: variants.to_vec(), rounds })
}

/// Hold out each of the 12 modifiers in turn.
pub fn run_ood_modifiers(
    corpus: &[PairedSample],
    variants: &[Variant],
    seed: u64,
    opts: &EvalOptions,
) -> Result<Report, EvalError> {
    let tokens = Modifier::ALL.iter().map(|&m| HoldoutToken::Modifier(m)).collect();
    run_holdout(Protocol::OodModifiers, corpus, variants, tokens, STREAM_OOD_MOD, seed, opts)
}

/// Hold out each of the 18 direction tokens in turn.
pub fn run_ood_directions(
    corpus: &[PairedSample],
    variants: &[Variant],
    seed: u64,
    opts: &EvalOptions,
) -> Result<Report, EvalError> {
    let tokens = Direction::ALL.iter().map(|&d| HoldoutToken::Direction(d)).collect();
    run_holdout(Protocol::OodDirections, corpus, variants, tokens, STREAM_OOD_DIR, seed, opts)
}
