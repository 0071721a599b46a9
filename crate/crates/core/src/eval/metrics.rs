use ndarray::ArrayView2;

use super::EvalError;
use crate::lang::{cosine, EmbeddingProvider};
use crate::vocab::{Direction, Modifier};

/// Mean squared error over every entry of two force matrices (N^2).
pub fn fp_acc(pred: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64, EvalError> {
    if pred.dim() != truth.dim() {
        return Err(EvalError::Shape { pred: pred.dim(), truth: truth.dim() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(truth.iter()).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sum / pred.len() as f64)
}

/// Cosine of two total impulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdAcc {
    pub value: f64,
    /// Either vector was zero; `value` is then 0.
    pub degenerate: bool,
}

pub fn fd_acc(pred: [f64; 3], truth: [f64; 3]) -> FdAcc {
    let zero = |v: [f64; 3]| v.iter().all(|&x| x == 0.0);
    if zero(pred) || zero(truth) {
        return FdAcc { value: 0.0, degenerate: true };
    }
    FdAcc { value: cosine(&pred, &truth), degenerate: false }
}

/// Cosine of the provider embeddings of two texts.
pub fn word_sim(a: &str, b: &str, provider: &dyn EmbeddingProvider) -> Result<f64, EvalError> {
    let ea = provider.embed(a)?;
    let eb = provider.embed(b)?;
    Ok(cosine(ea.as_slice(), eb.as_slice()))
}

/// Similarity of two slot texts with the empty-word rule: both empty score 1,
/// exactly one empty scores 0.
pub fn slot_sim(a: &str, b: &str, provider: &dyn EmbeddingProvider) -> Result<f64, EvalError> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok(1.0),
        (true, false) | (false, true) => Ok(0.0),
        (false, false) => word_sim(a, b, provider),
    }
}

pub fn mod_sim(pred: Option<Modifier>, truth: Option<Modifier>, provider: &dyn EmbeddingProvider) -> Result<f64, EvalError> {
    let text = |m: Option<Modifier>| m.map_or("", Modifier::as_str);
    slot_sim(text(pred), text(truth), provider)
}

/// Directions are compared through their rendered text ("forward and right").
pub fn dir_sim(
    pred: Option<Direction>,
    truth: Option<Direction>,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, EvalError> {
    let text = |d: Option<Direction>| d.map_or(String::new(), Direction::render);
    slot_sim(&text(pred), &text(truth), provider)
}

pub fn phrase_sim(mod_sim: f64, dir_sim: f64) -> f64 {
    (mod_sim + dir_sim) / 2.0
}
