//! Loss functions with analytic gradients.
//!
//! Single-sample forms follow the textbook definitions; the batched forms
//! average over rows and return the gradient of that average.

use ndarray::{s, Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::lang::{BinaryPhraseVector, BINARY_DIM, BLOCK};

/// Mean of squared differences; gradient `2 (pred - target) / len`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if pred.len() != target.len() {
        return Err(NnError::Dimension { expected: target.len(), got: pred.len() });
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// Cross-entropy of a blockwise softmax against the two-hot target: the sum
/// over both 31-wide blocks of `-log p(hot index)`.
pub fn ce_loss(logits: &[f64], target: &BinaryPhraseVector) -> Result<(f64, Vec<f64>), NnError> {
    if logits.len() != BINARY_DIM {
        return Err(NnError::Dimension { expected: BINARY_DIM, got: logits.len() });
    }
    let t: Vec<f64> = target.to_f64();
    let pred = ArrayView2::from_shape((1, BINARY_DIM), logits).expect("row");
    let tgt = ArrayView2::from_shape((1, BINARY_DIM), &t).expect("row");
    let (loss, grad) = ce_batch(pred, tgt)?;
    Ok((loss, grad.into_raw_vec_and_offset().0))
}

fn check_same(pred: &ArrayView2<'_, f64>, target: &ArrayView2<'_, f64>) -> Result<(), NnError> {
    if pred.dim() != target.dim() {
        return Err(NnError::Dimension { expected: target.len(), got: pred.len() });
    }
    if pred.nrows() == 0 {
        return Err(NnError::EmptyBatch);
    }
    Ok(())
}

/// Batched MSE: mean over rows of the per-row [`mse_loss`].
pub fn mse_batch(
    pred: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>), NnError> {
    check_same(&pred, &target)?;
    let (rows, cols) = pred.dim();
    let scale = 1.0 / (rows * cols) as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() * scale;
    Ok((loss, diff * (2.0 * scale)))
}

/// Batched blockwise cross-entropy: mean over rows. Targets are two-hot rows
/// (any per-block distribution works; gradient is `softmax - target`).
pub fn ce_batch(
    logits: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>), NnError> {
    check_same(&logits, &target)?;
    if logits.ncols() != BINARY_DIM {
        return Err(NnError::Dimension { expected: BINARY_DIM, got: logits.ncols() });
    }
    let rows = logits.nrows();
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for r in 0..rows {
        for b in 0..2 {
            let block = s![r, b * BLOCK..(b + 1) * BLOCK];
            let z = logits.slice(block);
            let t = target.slice(block);
            let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let sum_exp: f64 = z.iter().map(|&v| (v - max).exp()).sum();
            let log_sum = sum_exp.ln();
            // log p_k = z_k - max - log_sum
            loss -= z
                .iter()
                .zip(t.iter())
                .map(|(&zk, &tk)| if tk != 0.0 { tk * (zk - max - log_sum) } else { 0.0 })
                .sum::<f64>();
            let mut g = grad.slice_mut(block);
            Zip::from(&mut g).and(&z).and(&t).for_each(|g, &zk, &tk| {
                *g = ((zk - max).exp() / sum_exp - tk) / rows as f64;
            });
        }
    }
    Ok((loss / rows as f64, grad))
}

/// Contrastive parameters for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveParams {
    /// Weight of the negative-pair hinge terms.
    pub lambda: f64,
    /// Margin in squared-distance units.
    pub margin: f64,
}

/// Paired-latent contrastive loss over a batch (rows are latents):
///
/// `sum_i |zf_i - zp_i|^2 + lambda * sum_i sum_{j != i} max(0, m - |zf_i - zp_j|^2)`
///
/// Hinge terms exactly at the margin are inactive.
pub fn contrastive_loss(
    zf: ArrayView2<'_, f64>,
    zp: ArrayView2<'_, f64>,
    params: ContrastiveParams,
) -> Result<(f64, Array2<f64>, Array2<f64>), NnError> {
    if zf.dim() != zp.dim() {
        return Err(NnError::Dimension { expected: zf.nrows(), got: zp.nrows() });
    }
    if zf.nrows() == 0 {
        return Err(NnError::EmptyBatch);
    }
    let n = zf.nrows();
    let mut gf = Array2::zeros(zf.raw_dim());
    let mut gp = Array2::zeros(zp.raw_dim());
    let mut loss = 0.0;
    for i in 0..n {
        let fi = zf.row(i);
        for j in 0..n {
            let diff = &fi - &zp.row(j);
            let d2: f64 = diff.iter().map(|d| d * d).sum();
            if i == j {
                loss += d2;
                gf.row_mut(i).scaled_add(2.0, &diff);
                gp.row_mut(j).scaled_add(-2.0, &diff);
            } else {
                let hinge = params.margin - d2;
                if hinge > 0.0 {
                    loss += params.lambda * hinge;
                    gf.row_mut(i).scaled_add(-2.0 * params.lambda, &diff);
                    gp.row_mut(j).scaled_add(2.0 * params.lambda, &diff);
                }
            }
        }
    }
    Ok((loss, gf, gp))
}
