//! JSON checkpoints. Layout:
//!
//! ```text
//! { "format_version": 1, "vocabulary_version": "mvv-1", "variant": "dae_b",
//!   "seed": ..., "config": {...}, "normalization": {"min": [..], "max": [..]},
//!   "provider": null | {"kind": "hashing", "seed": ..} | {"kind": "table", "path": ..},
//!   "nets": [{"dims": [...], "weights": [...]}, ...],   // per layer W row-major, then b
//!   "svm_knn": null | {...} }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ModelError, Params, SvmKnn, TrainConfig, TrainedModel, Variant};
use crate::lang::{EmbeddingProvider, ProviderSpec};
use crate::nn::{DaeNets, FeedForwardNet};
use crate::signal::NormalizationParams;
use crate::vocab::VOCAB_VERSION;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetRecord {
    dims: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    vocabulary_version: String,
    variant: String,
    seed: u64,
    config: TrainConfig,
    normalization: NormalizationParams,
    provider: Option<ProviderSpec>,
    nets: Vec<NetRecord>,
    svm_knn: Option<SvmKnn>,
}

fn net_record(n: &FeedForwardNet) -> NetRecord {
    NetRecord { dims: n.dims(), weights: n.flat_params() }
}

pub fn save_checkpoint_to(model: &TrainedModel, mut w: impl Write) -> Result<(), ModelError> {
    let (nets, svm_knn) = match model.params() {
        Params::Dae(d) => (d.iter().iter().map(|n| net_record(n)).collect(), None),
        Params::Dmlp { force_to_phrase, phrase_to_force } => {
            (vec![net_record(force_to_phrase), net_record(phrase_to_force)], None)
        }
        Params::SvmKnn(s) => (vec![], Some(s.clone())),
    };
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        vocabulary_version: VOCAB_VERSION.to_string(),
        variant: model.variant().as_str().to_string(),
        seed: model.seed(),
        config: model.config().clone(),
        normalization: *model.normalization(),
        provider: model.provider_spec(),
        nets,
        svm_knn,
    };
    serde_json::to_writer(&mut w, &file).map_err(|e| ModelError::Malformed(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| ModelError::Io { path: String::new(), source })
}

pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let io = |source| ModelError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io)?;
    save_checkpoint_to(model, BufWriter::new(file)).map_err(|e| match e {
        ModelError::Io { source, .. } => io(source),
        other => other,
    })
}

/// Parse a checkpoint. `provider` overrides the recorded provider spec of
/// embedding variants (e.g. a table moved to another path).
pub fn load_checkpoint_from(
    mut r: impl Read,
    provider: Option<Arc<dyn EmbeddingProvider>>,
) -> Result<TrainedModel, ModelError> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|source| ModelError::Io { path: String::new(), source })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(ModelError::Version(format!("format version {v}, expected {FORMAT_VERSION}"))),
        None => return Err(ModelError::Malformed("missing format_version".into())),
    }
    match value.get("vocabulary_version").and_then(|v| v.as_str()) {
        Some(VOCAB_VERSION) => {}
        other => {
            return Err(ModelError::Version(format!(
                "vocabulary version {other:?}, expected {VOCAB_VERSION:?}"
            )))
        }
    }
    let tag = value.get("variant").and_then(|v| v.as_str()).unwrap_or_default();
    let variant: Variant = tag.parse().map_err(ModelError::Version)?;
    let file: CheckpointFile = serde_json::from_value(value).map_err(|e| ModelError::Malformed(e.to_string()))?;

    let expected = variant.architecture();
    let got: Vec<Vec<usize>> = file.nets.iter().map(|n| n.dims.clone()).collect();
    if got != expected {
        return Err(ModelError::Malformed(format!(
            "layer dims {got:?} do not match variant {variant} ({expected:?})"
        )));
    }
    let mut nets = file
        .nets
        .iter()
        .map(|n| FeedForwardNet::from_flat(&n.dims, &n.weights))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ModelError::Malformed(e.to_string()))?;
    let params = match variant {
        Variant::DaeB | Variant::DaeS => {
            let phrase_decoder = nets.pop().expect("checked dims");
            let phrase_encoder = nets.pop().expect("checked dims");
            let force_decoder = nets.pop().expect("checked dims");
            let force_encoder = nets.pop().expect("checked dims");
            Params::Dae(DaeNets { force_encoder, force_decoder, phrase_encoder, phrase_decoder })
        }
        Variant::DmlpB | Variant::DmlpS => {
            let phrase_to_force = nets.pop().expect("checked dims");
            let force_to_phrase = nets.pop().expect("checked dims");
            Params::Dmlp { force_to_phrase, phrase_to_force }
        }
        Variant::SvmKnn => Params::SvmKnn(
            file.svm_knn.ok_or_else(|| ModelError::Malformed("svm_knn checkpoint without classifier".into()))?,
        ),
    };
    let provider = match (variant.needs_provider(), provider, &file.provider) {
        (false, _, _) => None,
        (true, Some(p), _) => Some(p),
        (true, None, Some(spec)) => Some(spec.build()?),
        (true, None, None) => return Err(ModelError::ProviderRequired(variant)),
    };
    TrainedModel::assemble(variant, file.config, file.seed, file.normalization, params, provider)
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
    provider: Option<Arc<dyn EmbeddingProvider>>,
) -> Result<TrainedModel, ModelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    load_checkpoint_from(BufReader::new(file), provider)
}
