//! The five model variants behind one train/translate interface.

mod checkpoint;
mod svm_knn;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PairedSample;
use crate::lang::{
    decode_binary, encode_binary, EmbeddingProvider, LangError, MvvMatch, MvvMatcher, ProviderSpec, BINARY_DIM,
    EMBED_DIM,
};
use crate::nn::{
    mse_batch, optimize_step, total_loss, AdamConfig, AdamState, ContrastiveParams, DaeNets, FeedForwardNet,
    LossWeights, NnError, PhraseLoss,
};
use crate::profile::{ForceMatrix, ImpulseFeature, FEATURE_DIM, HORIZON_S, SAMPLES};
use crate::rng::{derive_seed, rng_from};
use crate::signal::{
    denormalize, fit_normalizer, impulse_to_force, normalize, profile_to_impulse, smooth_impulse,
    NormalizationParams, SignalError,
};
use crate::vocab::{phrase_to_text, Phrase};

pub use checkpoint::{load_checkpoint, load_checkpoint_from, save_checkpoint, save_checkpoint_to, FORMAT_VERSION};
pub use svm_knn::{Exemplar, LinearOvr, SvmKnn, SvmParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("variant {0} needs an embedding provider")]
    ProviderRequired(Variant),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("checkpoint version error: {0}")]
    Version(String),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    DaeB,
    DaeS,
    DmlpB,
    DmlpS,
    SvmKnn,
}

/// How phrases are represented at a network boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhraseKind {
    Binary,
    Embedding,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::DaeB, Variant::DaeS, Variant::DmlpB, Variant::DmlpS, Variant::SvmKnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::DaeB => "dae_b",
            Variant::DaeS => "dae_s",
            Variant::DmlpB => "dmlp_b",
            Variant::DmlpS => "dmlp_s",
            Variant::SvmKnn => "svm_knn",
        }
    }

    pub fn phrase_kind(self) -> PhraseKind {
        match self {
            Variant::DaeS | Variant::DmlpS => PhraseKind::Embedding,
            _ => PhraseKind::Binary,
        }
    }

    pub fn needs_provider(self) -> bool {
        self.phrase_kind() == PhraseKind::Embedding
    }

    fn phrase_loss(self) -> PhraseLoss {
        match self.phrase_kind() {
            PhraseKind::Binary => PhraseLoss::CrossEntropy,
            PhraseKind::Embedding => PhraseLoss::Mse,
        }
    }

    /// Layer widths of the networks, in checkpoint order.
    pub fn architecture(self) -> Vec<Vec<usize>> {
        let force_enc = vec![FEATURE_DIM, 256, 64, 16];
        let force_dec = vec![16, 64, 256, FEATURE_DIM];
        let (phrase_enc, phrase_dec) = match self.phrase_kind() {
            PhraseKind::Binary => (vec![BINARY_DIM, 48, 16], vec![16, 48, BINARY_DIM]),
            PhraseKind::Embedding => (vec![EMBED_DIM, 256, 64, 16], vec![16, 64, 256, EMBED_DIM]),
        };
        let join = |a: &[usize], b: &[usize]| a.iter().chain(&b[1..]).copied().collect::<Vec<_>>();
        match self {
            Variant::DaeB | Variant::DaeS => vec![force_enc, force_dec, phrase_enc, phrase_dec],
            Variant::DmlpB | Variant::DmlpS => {
                vec![join(&force_enc, &phrase_dec), join(&phrase_enc, &force_dec)]
            }
            Variant::SvmKnn => vec![],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.as_str()).collect();
            format!("unknown variant {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss_weights: LossWeights,
    pub margin: f64,
    /// Negative-pair weight; `None` means `1 / (n - 1)` for a batch of `n`.
    pub lambda: Option<f64>,
    /// Gaussian width (grid samples) applied to decoded impulses before
    /// differentiation. `0` disables.
    pub impulse_smoothing: f64,
    /// Threshold when mapping decoded embeddings to phrases; below `-1` every
    /// output maps to its nearest phrase.
    pub decode_sigma: f64,
    pub svm: SvmParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            loss_weights: LossWeights::default(),
            margin: 1.0,
            lambda: None,
            impulse_smoothing: 3.0,
            decode_sigma: -1.0,
            svm: SvmParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        let w = self.loss_weights;
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if [w.k_r, w.k_z, w.k_t].iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return bad("loss weights must be non-negative");
        }
        if !(self.margin >= 0.0) || self.lambda.is_some_and(|l| !(l >= 0.0)) {
            return bad("margin and lambda must be non-negative");
        }
        if !(self.impulse_smoothing >= 0.0 && self.impulse_smoothing <= 64.0) {
            return bad("impulse smoothing must lie in [0, 64]");
        }
        if !(self.svm.learning_rate > 0.0) || self.svm.epochs == 0 || !(self.svm.l2 >= 0.0) {
            return bad("invalid SVM parameters");
        }
        Ok(())
    }
}

/// Per-epoch training losses (means over samples).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon_force: f64,
    pub recon_phrase: f64,
    pub contrastive: f64,
    pub translation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Params {
    Dae(DaeNets),
    Dmlp { force_to_phrase: FeedForwardNet, phrase_to_force: FeedForwardNet },
    SvmKnn(SvmKnn),
}

/// A trained model. Immutable; safe to query from several threads.
#[derive(Clone)]
pub struct TrainedModel {
    variant: Variant,
    config: TrainConfig,
    seed: u64,
    normalization: NormalizationParams,
    params: Params,
    provider: Option<Arc<dyn EmbeddingProvider>>,
    matcher: Option<Arc<MvvMatcher>>,
}

impl fmt::Debug for TrainedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainedModel")
            .field("variant", &self.variant)
            .field("seed", &self.seed)
            .field("provider", &self.provider.as_ref().map(|p| p.spec()))
            .finish_non_exhaustive()
    }
}

/// Text translated to force, with the phrase it was matched to.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTranslation {
    pub forces: ForceMatrix,
    pub matched: MvvMatch,
}

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

fn rows(data: &[Vec<f64>]) -> Array2<f64> {
    let cols = data.first().map_or(0, Vec::len);
    let flat: Vec<f64> = data.iter().flatten().copied().collect();
    Array2::from_shape_vec((data.len(), cols), flat).expect("rectangular rows")
}

/// Train `variant` on `samples`. Embedding variants need `provider`.
pub fn train(
    variant: Variant,
    samples: &[PairedSample],
    config: &TrainConfig,
    seed: u64,
    provider: Option<Arc<dyn EmbeddingProvider>>,
) -> Result<(TrainedModel, Vec<EpochLoss>), ModelError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if variant.needs_provider() && provider.is_none() {
        return Err(ModelError::ProviderRequired(variant));
    }
    let provider = if variant.needs_provider() { provider } else { None };
    let impulses: Vec<ImpulseFeature> = samples
        .iter()
        .map(|s| profile_to_impulse(&s.profile))
        .collect::<Result<_, _>>()?;
    let normalization = fit_normalizer(&impulses)?;

    let mut model = TrainedModel {
        variant,
        config: config.clone(),
        seed,
        normalization,
        params: Params::SvmKnn(SvmKnn {
            modifier: LinearOvr { classes: vec![], weights: vec![] },
            direction: LinearOvr { classes: vec![], weights: vec![] },
            exemplars: vec![],
        }),
        matcher: None,
        provider,
    };
    model.attach_matcher()?;
    log::debug!(
        "{variant}: init seed {}, shuffle seed {}",
        derive_seed(seed, STREAM_INIT),
        derive_seed(seed, STREAM_SHUFFLE)
    );

    let history = if variant == Variant::SvmKnn {
        let features: Vec<[f64; 3]> = impulses.iter().map(|f| model.svm_feature(f)).collect();
        let exemplars = samples
            .iter()
            .zip(&impulses)
            .map(|(s, f)| Exemplar { phrase: s.phrase, impulse: f.final_impulse() })
            .collect();
        let mut rng = rng_from(derive_seed(seed, STREAM_SHUFFLE));
        let (svm, hinge) = SvmKnn::fit(&features, exemplars, config.svm, &mut rng);
        model.params = Params::SvmKnn(svm);
        hinge
            .into_iter()
            .enumerate()
            .map(|(i, h)| EpochLoss { epoch: i + 1, total: h, ..Default::default() })
            .collect()
    } else {
        let xf = rows(&impulses.iter().map(|f| normalize(f, &model.normalization)).collect::<Vec<_>>());
        let mut cache: HashMap<Phrase, Vec<f64>> = HashMap::new();
        let mut xp_rows = Vec::with_capacity(samples.len());
        for s in samples {
            if let Entry::Vacant(e) = cache.entry(s.phrase) {
                e.insert(model.phrase_input(&s.phrase)?);
            }
            xp_rows.push(cache[&s.phrase].clone());
        }
        let xp = rows(&xp_rows);
        let mut init = rng_from(derive_seed(seed, STREAM_INIT));
        let mut nets: Vec<FeedForwardNet> = variant
            .architecture()
            .iter()
            .map(|dims| FeedForwardNet::new(dims, &mut init))
            .collect::<Result<_, _>>()?;
        match variant {
            Variant::DaeB | Variant::DaeS => {
                let mut dae = DaeNets {
                    phrase_decoder: nets.pop().expect("4 nets"),
                    phrase_encoder: nets.pop().expect("4 nets"),
                    force_decoder: nets.pop().expect("4 nets"),
                    force_encoder: nets.pop().expect("4 nets"),
                };
                let h = train_dae(&mut dae, &xf, &xp, variant.phrase_loss(), config, seed)?;
                model.params = Params::Dae(dae);
                h
            }
            _ => {
                let phrase_to_force = nets.pop().expect("2 nets");
                let force_to_phrase = nets.pop().expect("2 nets");
                let mut pair = [force_to_phrase, phrase_to_force];
                let h = train_dmlp(&mut pair, &xf, &xp, variant.phrase_loss(), config, seed)?;
                let [force_to_phrase, phrase_to_force] = pair;
                model.params = Params::Dmlp { force_to_phrase, phrase_to_force };
                h
            }
        }
    };
    Ok((model, history))
}

fn adam_step(nets: &mut [&mut FeedForwardNet], grads: &[&crate::nn::NetGrads], state: &mut AdamState, lr: f64) -> Result<(), NnError> {
    let grad_slices: Vec<&[f64]> = grads.iter().flat_map(|g| g.slices()).collect();
    let mut params: Vec<&mut [f64]> = nets.iter_mut().flat_map(|n| n.params_mut()).collect();
    optimize_step(&mut params, &grad_slices, state, lr)
}

fn train_dae(
    nets: &mut DaeNets,
    xf: &Array2<f64>,
    xp: &Array2<f64>,
    phrase_loss: PhraseLoss,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<EpochLoss>, ModelError> {
    let n = xf.nrows();
    let mut rng = rng_from(derive_seed(seed, STREAM_SHUFFLE));
    let mut state = AdamState::new(AdamConfig::default());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut acc = EpochLoss { epoch, ..Default::default() };
        for chunk in order.chunks(config.batch_size) {
            let bf = xf.select(Axis(0), chunk);
            let bp = xp.select(Axis(0), chunk);
            let b = chunk.len();
            let lambda = config.lambda.unwrap_or(if b > 1 { 1.0 / (b - 1) as f64 } else { 0.0 });
            let cparams = ContrastiveParams { lambda, margin: config.margin };
            let (loss, grads) = total_loss(nets, bf.view(), bp.view(), config.loss_weights, cparams, phrase_loss)?;
            if !loss.total.is_finite() {
                return Err(ModelError::Diverged(epoch));
            }
            let w = b as f64 / n as f64;
            acc.total += loss.total * w;
            acc.recon_force += loss.recon_force * w;
            acc.recon_phrase += loss.recon_phrase * w;
            acc.contrastive += loss.contrastive * w;
            acc.translation += loss.translation * w;
            let [a, b2, c, d] = nets.iter_mut();
            adam_step(&mut [a, b2, c, d], &grads.iter(), &mut state, config.learning_rate)?;
        }
        log::debug!("epoch {epoch}: total {:.6}", acc.total);
        history.push(acc);
    }
    Ok(history)
}

/// Two independent direct maps trained side by side; the reported
/// `translation` is the sum of both errors.
fn train_dmlp(
    nets: &mut [FeedForwardNet; 2],
    xf: &Array2<f64>,
    xp: &Array2<f64>,
    phrase_loss: PhraseLoss,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<EpochLoss>, ModelError> {
    let n = xf.nrows();
    let mut rng = rng_from(derive_seed(seed, STREAM_SHUFFLE));
    let mut state = AdamState::new(AdamConfig::default());
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut acc = EpochLoss { epoch, ..Default::default() };
        for chunk in order.chunks(config.batch_size) {
            let bf = xf.select(Axis(0), chunk);
            let bp = xp.select(Axis(0), chunk);
            let t_fp = nets[0].forward_trace(bf.view())?;
            let (l_fp, g_fp) = phrase_loss.eval(t_fp.output().view(), bp.view())?;
            let (grads_fp, _) = nets[0].backward(&t_fp, g_fp.view());
            let t_pf = nets[1].forward_trace(bp.view())?;
            let (l_pf, g_pf) = mse_batch(t_pf.output().view(), bf.view())?;
            let (grads_pf, _) = nets[1].backward(&t_pf, g_pf.view());
            let loss = l_fp + l_pf;
            if !loss.is_finite() {
                return Err(ModelError::Diverged(epoch));
            }
            let w = chunk.len() as f64 / n as f64;
            acc.total += loss * w;
            acc.translation += loss * w;
            let [a, b] = nets;
            adam_step(&mut [a, b], &[&grads_fp, &grads_pf], &mut state, config.learning_rate)?;
        }
        history.push(acc);
    }
    Ok(history)
}

impl TrainedModel {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normalization(&self) -> &NormalizationParams {
        &self.normalization
    }

    pub fn provider(&self) -> Option<&Arc<dyn EmbeddingProvider>> {
        self.provider.as_ref()
    }

    pub fn provider_spec(&self) -> Option<ProviderSpec> {
        self.provider.as_ref().map(|p| p.spec())
    }

    pub(crate) fn params(&self) -> &Params {
        &self.params
    }

    pub(crate) fn assemble(
        variant: Variant,
        config: TrainConfig,
        seed: u64,
        normalization: NormalizationParams,
        params: Params,
        provider: Option<Arc<dyn EmbeddingProvider>>,
    ) -> Result<Self, ModelError> {
        let mut m = Self { variant, config, seed, normalization, params, provider, matcher: None };
        m.attach_matcher()?;
        Ok(m)
    }

    fn attach_matcher(&mut self) -> Result<(), ModelError> {
        if self.variant.needs_provider() {
            let provider = self.provider.as_ref().ok_or(ModelError::ProviderRequired(self.variant))?;
            self.matcher = Some(Arc::new(MvvMatcher::new(provider.as_ref())?));
        }
        Ok(())
    }

    fn svm_feature(&self, f: &ImpulseFeature) -> [f64; 3] {
        let j = f.final_impulse();
        [0, 1, 2].map(|a| self.normalization.forward(a, j[a]))
    }

    /// Network-side representation of a phrase.
    pub fn phrase_input(&self, p: &Phrase) -> Result<Vec<f64>, ModelError> {
        Ok(match self.variant.phrase_kind() {
            PhraseKind::Binary => encode_binary(p).to_f64(),
            PhraseKind::Embedding => {
                let provider = self.provider.as_ref().ok_or(ModelError::ProviderRequired(self.variant))?;
                provider.embed(&phrase_to_text(p))?.as_slice().to_vec()
            }
        })
    }

    fn decode_phrase(&self, out: &[f64]) -> Result<Phrase, ModelError> {
        match &self.matcher {
            Some(m) => Ok(m.match_vector(out, self.config.decode_sigma).phrase),
            None => Ok(decode_binary(out)?),
        }
    }

    /// Describe a force profile.
    pub fn force_to_phrase(&self, profile: &crate::profile::ForceProfile) -> Result<Phrase, ModelError> {
        let impulse = profile_to_impulse(profile)?;
        match &self.params {
            Params::SvmKnn(svm) => Ok(svm.classify(&self.svm_feature(&impulse))),
            Params::Dae(nets) => {
                let x = normalize(&impulse, &self.normalization);
                let z = nets.force_encoder.forward(&x)?;
                self.decode_phrase(&nets.phrase_decoder.forward(&z)?)
            }
            Params::Dmlp { force_to_phrase, .. } => {
                let x = normalize(&impulse, &self.normalization);
                self.decode_phrase(&force_to_phrase.forward(&x)?)
            }
        }
    }

    /// Impulse curve (N*s) the model produces for a phrase, before smoothing.
    pub fn phrase_to_impulse(&self, p: &Phrase) -> Result<ImpulseFeature, ModelError> {
        let out = match &self.params {
            Params::SvmKnn(svm) => {
                let j = svm.recall(p);
                let values = (0..3)
                    .flat_map(|a| (0..SAMPLES).map(move |i| j[a] * i as f64 / (SAMPLES - 1) as f64))
                    .collect();
                return Ok(ImpulseFeature::new(values).expect("finite ramp"));
            }
            Params::Dae(nets) => {
                let z = nets.phrase_encoder.forward(&self.phrase_input(p)?)?;
                nets.force_decoder.forward(&z)?
            }
            Params::Dmlp { phrase_to_force, .. } => phrase_to_force.forward(&self.phrase_input(p)?)?,
        };
        Ok(denormalize(&out, &self.normalization))
    }

    /// 3 x 256 force matrix (Newtons) for a phrase.
    pub fn phrase_to_force(&self, p: &Phrase) -> Result<ForceMatrix, ModelError> {
        if let Params::SvmKnn(svm) = &self.params {
            // derivative of the linear ramp to the recalled impulse
            let j = svm.recall(p);
            let mut out = Array2::zeros((3, SAMPLES));
            for a in 0..3 {
                out.row_mut(a).fill(j[a] / HORIZON_S);
            }
            return Ok(out);
        }
        let impulse = self.phrase_to_impulse(p)?;
        let impulse = if self.config.impulse_smoothing > 0.0 {
            smooth_impulse(&impulse, self.config.impulse_smoothing)
        } else {
            impulse
        };
        Ok(impulse_to_force(&impulse, HORIZON_S))
    }

    /// Open-vocabulary input: match `text` to a phrase, then translate. A
    /// rejected match yields the zero force matrix.
    pub fn translate_text(
        &self,
        text: &str,
        provider: &dyn EmbeddingProvider,
        sigma: f64,
    ) -> Result<TextTranslation, ModelError> {
        let matcher = MvvMatcher::new(provider)?;
        self.translate_text_with(text, provider, &matcher, sigma)
    }

    pub fn translate_text_with(
        &self,
        text: &str,
        provider: &dyn EmbeddingProvider,
        matcher: &MvvMatcher,
        sigma: f64,
    ) -> Result<TextTranslation, ModelError> {
        let matched = matcher.match_text(text, provider, sigma)?;
        let forces = if matched.phrase.is_empty() {
            Array2::zeros((3, SAMPLES))
        } else {
            self.phrase_to_force(&matched.phrase)?
        };
        Ok(TextTranslation { forces, matched })
    }
}
