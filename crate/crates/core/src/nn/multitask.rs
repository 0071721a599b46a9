//! Joint objective of the dual autoencoder: reconstruction, contrastive
//! alignment, and cross-modal translation.
//!
//! Batch convention: reconstruction and translation terms are means over the
//! batch rows; the contrastive term enters as the batch sum divided by the
//! batch size, so every component is on a per-sample scale.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::loss::{ce_batch, contrastive_loss, mse_batch, ContrastiveParams};
use super::net::{FeedForwardNet, NetGrads};
use super::NnError;

/// Reconstruction error used on the phrase side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhraseLoss {
    /// Blockwise softmax cross-entropy (binary phrase vectors).
    CrossEntropy,
    /// Mean squared error (sentence embeddings).
    Mse,
}

impl PhraseLoss {
    pub fn eval(
        self,
        pred: ArrayView2<'_, f64>,
        target: ArrayView2<'_, f64>,
    ) -> Result<(f64, Array2<f64>), NnError> {
        match self {
            PhraseLoss::CrossEntropy => ce_batch(pred, target),
            PhraseLoss::Mse => mse_batch(pred, target),
        }
    }
}

/// Weights of the reconstruction, contrastive and translation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub k_r: f64,
    pub k_z: f64,
    pub k_t: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { k_r: 1.0, k_z: 1.0, k_t: 1.0 }
    }
}

/// Encoders and decoders of both modalities.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeNets {
    pub force_encoder: FeedForwardNet,
    pub force_decoder: FeedForwardNet,
    pub phrase_encoder: FeedForwardNet,
    pub phrase_decoder: FeedForwardNet,
}

impl DaeNets {
    pub fn check(&self) -> Result<(), NnError> {
        let latent = self.force_encoder.output_dim();
        let ok = self.phrase_encoder.output_dim() == latent
            && self.force_decoder.input_dim() == latent
            && self.phrase_decoder.input_dim() == latent
            && self.force_decoder.output_dim() == self.force_encoder.input_dim()
            && self.phrase_decoder.output_dim() == self.phrase_encoder.input_dim();
        if ok {
            Ok(())
        } else {
            Err(NnError::BadArchitecture(vec![
                self.force_encoder.input_dim(),
                latent,
                self.phrase_encoder.input_dim(),
                self.phrase_encoder.output_dim(),
            ]))
        }
    }

    pub fn iter(&self) -> [&FeedForwardNet; 4] {
        [&self.force_encoder, &self.force_decoder, &self.phrase_encoder, &self.phrase_decoder]
    }

    pub fn iter_mut(&mut self) -> [&mut FeedForwardNet; 4] {
        [
            &mut self.force_encoder,
            &mut self.force_decoder,
            &mut self.phrase_encoder,
            &mut self.phrase_decoder,
        ]
    }
}

/// Gradients for the four nets, in [`DaeNets::iter`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeGrads {
    pub force_encoder: NetGrads,
    pub force_decoder: NetGrads,
    pub phrase_encoder: NetGrads,
    pub phrase_decoder: NetGrads,
}

impl DaeGrads {
    pub fn iter(&self) -> [&NetGrads; 4] {
        [&self.force_encoder, &self.force_decoder, &self.phrase_encoder, &self.phrase_decoder]
    }
}

/// Per-sample components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon_force: f64,
    pub recon_phrase: f64,
    pub contrastive: f64,
    pub translation: f64,
    pub total: f64,
}

fn check_batch(nets: &DaeNets, xf: &ArrayView2<'_, f64>, xp: &ArrayView2<'_, f64>) -> Result<(), NnError> {
    nets.check()?;
    if xf.nrows() != xp.nrows() {
        return Err(NnError::Dimension { expected: xf.nrows(), got: xp.nrows() });
    }
    if xf.nrows() == 0 {
        return Err(NnError::EmptyBatch);
    }
    Ok(())
}

/// `err(xf, D_f(E_p(xp))) + err(xp, D_p(E_f(xf)))`, averaged over the batch.
pub fn translation_loss(
    nets: &DaeNets,
    xf: ArrayView2<'_, f64>,
    xp: ArrayView2<'_, f64>,
    phrase_loss: PhraseLoss,
) -> Result<(f64, DaeGrads), NnError> {
    check_batch(nets, &xf, &xp)?;
    // phrase -> force
    let ep = nets.phrase_encoder.forward_trace(xp)?;
    let df = nets.force_decoder.forward_trace(ep.output().view())?;
    let (l_pf, g_pf) = mse_batch(df.output().view(), xf)?;
    let (g_df, g_zp) = nets.force_decoder.backward(&df, g_pf.view());
    let (g_ep, _) = nets.phrase_encoder.backward(&ep, g_zp.view());
    // force -> phrase
    let ef = nets.force_encoder.forward_trace(xf)?;
    let dp = nets.phrase_decoder.forward_trace(ef.output().view())?;
    let (l_fp, g_fp) = phrase_loss.eval(dp.output().view(), xp)?;
    let (g_dp, g_zf) = nets.phrase_decoder.backward(&dp, g_fp.view());
    let (g_ef, _) = nets.force_encoder.backward(&ef, g_zf.view());
    Ok((
        l_pf + l_fp,
        DaeGrads { force_encoder: g_ef, force_decoder: g_df, phrase_encoder: g_ep, phrase_decoder: g_dp },
    ))
}

/// `k_r (L_r,force + L_r,phrase) + k_z L_c / n + k_t L_t` over one batch.
pub fn total_loss(
    nets: &DaeNets,
    xf: ArrayView2<'_, f64>,
    xp: ArrayView2<'_, f64>,
    weights: LossWeights,
    cparams: ContrastiveParams,
    phrase_loss: PhraseLoss,
) -> Result<(LossBreakdown, DaeGrads), NnError> {
    check_batch(nets, &xf, &xp)?;
    let n = xf.nrows();
    let ef = nets.force_encoder.forward_trace(xf)?;
    let ep = nets.phrase_encoder.forward_trace(xp)?;
    let zf = ef.output();
    let zp = ep.output();

    // Each decoder sees its own modality's latents (reconstruction) stacked
    // over the other modality's latents (translation).
    let df = nets.force_decoder.forward_trace(concatenate![Axis(0), *zf, *zp].view())?;
    let dp = nets.phrase_decoder.forward_trace(concatenate![Axis(0), *zp, *zf].view())?;
    let (rf, g_rf) = mse_batch(df.output().slice(s![..n, ..]), xf)?;
    let (tf, g_tf) = mse_batch(df.output().slice(s![n.., ..]), xf)?;
    let (rp, g_rp) = phrase_loss.eval(dp.output().slice(s![..n, ..]), xp)?;
    let (tp, g_tp) = phrase_loss.eval(dp.output().slice(s![n.., ..]), xp)?;
    let (lc, g_cf, g_cp) = contrastive_loss(zf.view(), zp.view(), cparams)?;
    let contrastive = lc / n as f64;

    let g_df_out = concatenate![Axis(0), g_rf * weights.k_r, g_tf * weights.k_t];
    let g_dp_out = concatenate![Axis(0), g_rp * weights.k_r, g_tp * weights.k_t];
    let (g_df, g_df_in) = nets.force_decoder.backward(&df, g_df_out.view());
    let (g_dp, g_dp_in) = nets.phrase_decoder.backward(&dp, g_dp_out.view());

    let kc = weights.k_z / n as f64;
    let g_zf = &g_df_in.slice(s![..n, ..]) + &g_dp_in.slice(s![n.., ..]) + g_cf * kc;
    let g_zp = &g_df_in.slice(s![n.., ..]) + &g_dp_in.slice(s![..n, ..]) + g_cp * kc;
    let (g_ef, _) = nets.force_encoder.backward(&ef, g_zf.view());
    let (g_ep, _) = nets.phrase_encoder.backward(&ep, g_zp.view());

    let breakdown = LossBreakdown {
        recon_force: rf,
        recon_phrase: rp,
        contrastive,
        translation: tf + tp,
        total: weights.k_r * (rf + rp) + weights.k_z * contrastive + weights.k_t * (tf + tp),
    };
    Ok((
        breakdown,
        DaeGrads { force_encoder: g_ef, force_decoder: g_df, phrase_encoder: g_ep, phrase_decoder: g_dp },
    ))
}
