//! Analytic gradients against central finite differences. Loss values in the
//! oracles below are recomputed from scratch with plain loops. Each check
//! returns the worst relative gradient error and worst loss-value error over
//! its instances.

use forcelang::lang::{encode_binary, BINARY_DIM, BLOCK};
use forcelang::nn::{
    ce_loss, contrastive_loss, mse_loss, total_loss, translation_loss, ContrastiveParams, DaeNets,
    FeedForwardNet, LossWeights, PhraseLoss,
};
use forcelang::vocab::Phrase;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
pub const INSTANCES: usize = 20;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na.max(nb) < 1e-12 {
        0.0
    } else {
        diff / na.max(nb)
    }
}

fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + H;
            let up = f(&x);
            x[i] = orig - H;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}

fn oracle_mse(p: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>) -> f64 {
    let mut s = 0.0;
    for r in 0..p.nrows() {
        for c in 0..p.ncols() {
            s += (p[[r, c]] - t[[r, c]]).powi(2);
        }
    }
    s / p.len() as f64
}

fn oracle_ce(z: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>) -> f64 {
    let mut s = 0.0;
    for r in 0..z.nrows() {
        for b in 0..2 {
            let lo = b * BLOCK;
            let denom: f64 = (lo..lo + BLOCK).map(|k| z[[r, k]].exp()).sum();
            for k in lo..lo + BLOCK {
                if t[[r, k]] != 0.0 {
                    s -= t[[r, k]] * (z[[r, k]].exp() / denom).ln();
                }
            }
        }
    }
    s / z.nrows() as f64
}

fn oracle_contrastive(zf: ArrayView2<'_, f64>, zp: ArrayView2<'_, f64>, p: ContrastiveParams) -> f64 {
    let n = zf.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = (0..zf.ncols()).map(|k| (zf[[i, k]] - zp[[j, k]]).powi(2)).sum();
            if i == j {
                s += d2;
            } else {
                s += p.lambda * (p.margin - d2).max(0.0);
            }
        }
    }
    s
}

fn random_phrase_rows(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let all = Phrase::all();
    let mut m = Array2::zeros((n, BINARY_DIM));
    for r in 0..n {
        let v = encode_binary(&all[rng.gen_range(0..all.len())]).to_f64();
        m.row_mut(r).assign(&ndarray::Array1::from(v));
    }
    m
}

// Biases are randomized too: with zero biases a fully dead hidden layer puts
// the next preactivation exactly on the ReLU kink.
fn small_nets(rng: &mut ChaCha8Rng, phrase_dim: usize) -> DaeNets {
    let nets = DaeNets {
        force_encoder: FeedForwardNet::new(&[12, 8, 4], rng).unwrap(),
        force_decoder: FeedForwardNet::new(&[4, 8, 12], rng).unwrap(),
        phrase_encoder: FeedForwardNet::new(&[phrase_dim, 6, 4], rng).unwrap(),
        phrase_decoder: FeedForwardNet::new(&[4, 6, phrase_dim], rng).unwrap(),
    };
    let p: Vec<f64> = all_params(&nets).iter().map(|w| w + rng.gen_range(-0.1..0.1)).collect();
    with_params(&nets, &p)
}

fn with_params(nets: &DaeNets, flat: &[f64]) -> DaeNets {
    let mut out = nets.clone();
    let mut off = 0;
    for net in out.iter_mut() {
        let k = net.param_count();
        net.set_flat_params(&flat[off..off + k]).unwrap();
        off += k;
    }
    out
}

fn all_params(nets: &DaeNets) -> Vec<f64> {
    nets.iter().iter().flat_map(|n| n.flat_params()).collect()
}

fn phrase_err(kind: PhraseLoss, p: ArrayView2<'_, f64>, t: ArrayView2<'_, f64>) -> f64 {
    match kind {
        PhraseLoss::CrossEntropy => oracle_ce(p, t),
        PhraseLoss::Mse => oracle_mse(p, t),
    }
}

fn oracle_translation(nets: &DaeNets, xf: &Array2<f64>, xp: &Array2<f64>, kind: PhraseLoss) -> f64 {
    let zp = nets.phrase_encoder.forward_batch(xp.view()).unwrap();
    let zf = nets.force_encoder.forward_batch(xf.view()).unwrap();
    let f_hat = nets.force_decoder.forward_batch(zp.view()).unwrap();
    let p_hat = nets.phrase_decoder.forward_batch(zf.view()).unwrap();
    oracle_mse(f_hat.view(), xf.view()) + phrase_err(kind, p_hat.view(), xp.view())
}

fn oracle_total(
    nets: &DaeNets,
    xf: &Array2<f64>,
    xp: &Array2<f64>,
    w: LossWeights,
    c: ContrastiveParams,
    kind: PhraseLoss,
) -> f64 {
    let zf = nets.force_encoder.forward_batch(xf.view()).unwrap();
    let zp = nets.phrase_encoder.forward_batch(xp.view()).unwrap();
    let rf = oracle_mse(nets.force_decoder.forward_batch(zf.view()).unwrap().view(), xf.view());
    let rp = phrase_err(kind, nets.phrase_decoder.forward_batch(zp.view()).unwrap().view(), xp.view());
    let lc = oracle_contrastive(zf.view(), zp.view(), c) / xf.nrows() as f64;
    w.k_r * (rf + rp) + w.k_z * lc + w.k_t * oracle_translation(nets, xf, xp, kind)
}

fn phrase_batch(rng: &mut ChaCha8Rng, kind: PhraseLoss, n: usize) -> Array2<f64> {
    match kind {
        PhraseLoss::CrossEntropy => random_phrase_rows(rng, n),
        PhraseLoss::Mse => random_matrix(rng, n, 10, 1.0),
    }
}

fn phrase_dim(kind: PhraseLoss) -> usize {
    match kind {
        PhraseLoss::CrossEntropy => BINARY_DIM,
        PhraseLoss::Mse => 10,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Worst {
    pub grad: f64,
    pub value: f64,
}

impl Worst {
    fn update(&mut self, grad: f64, value: f64) {
        self.grad = self.grad.max(grad);
        self.value = self.value.max(value);
    }

    pub fn ok(&self) -> bool {
        self.grad <= TOL && self.value < 1e-10
    }
}

pub fn mse() -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut w = Worst::default();
    for _ in 0..INSTANCES {
        let n = rng.gen_range(1..20);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (l, g) = mse_loss(&p, &t).unwrap();
        let oracle = |x: &[f64]| {
            oracle_mse(ArrayView2::from_shape((1, n), x).unwrap(), ArrayView2::from_shape((1, n), &t).unwrap())
        };
        let num = numeric_grad(&p, oracle);
        w.update(rel_err(&g, &num), (l - oracle(&p)).abs());
    }
    w
}

pub fn ce() -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let all = Phrase::all();
    let mut w = Worst::default();
    for _ in 0..INSTANCES {
        let phrase = all[rng.gen_range(0..all.len())];
        let target = encode_binary(&phrase);
        let t = Array2::from_shape_vec((1, BINARY_DIM), target.to_f64()).unwrap();
        let z: Vec<f64> = (0..BINARY_DIM).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let (l, g) = ce_loss(&z, &target).unwrap();
        let oracle = |x: &[f64]| oracle_ce(ArrayView2::from_shape((1, BINARY_DIM), x).unwrap(), t.view());
        let num = numeric_grad(&z, oracle);
        w.update(rel_err(&g, &num), (l - oracle(&z)).abs());
    }
    w
}

pub fn contrastive() -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut w = Worst::default();
    for _ in 0..INSTANCES {
        let n = rng.gen_range(1..6);
        let d = rng.gen_range(1..6);
        let p = ContrastiveParams { lambda: rng.gen_range(0.1..2.0), margin: rng.gen_range(0.5..3.0) };
        let zf = random_matrix(&mut rng, n, d, 0.8);
        let zp = random_matrix(&mut rng, n, d, 0.8);
        let (l, gf, gp) = contrastive_loss(zf.view(), zp.view(), p).unwrap();
        let num_f = numeric_grad(zf.as_slice().unwrap(), |x| {
            oracle_contrastive(ArrayView2::from_shape((n, d), x).unwrap(), zp.view(), p)
        });
        let num_p = numeric_grad(zp.as_slice().unwrap(), |x| {
            oracle_contrastive(zf.view(), ArrayView2::from_shape((n, d), x).unwrap(), p)
        });
        let value = (l - oracle_contrastive(zf.view(), zp.view(), p)).abs();
        w.update(rel_err(gf.as_slice().unwrap(), &num_f), value);
        w.update(rel_err(gp.as_slice().unwrap(), &num_p), value);
    }
    w
}

pub fn translation() -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut w = Worst::default();
    for trial in 0..INSTANCES {
        let kind = if trial % 2 == 0 { PhraseLoss::CrossEntropy } else { PhraseLoss::Mse };
        let nets = small_nets(&mut rng, phrase_dim(kind));
        let n = rng.gen_range(1..5);
        let xf = random_matrix(&mut rng, n, 12, 1.0);
        let xp = phrase_batch(&mut rng, kind, n);
        let (l, g) = translation_loss(&nets, xf.view(), xp.view(), kind).unwrap();
        let analytic: Vec<f64> = g.iter().iter().flat_map(|g| g.flat()).collect();
        let num = numeric_grad(&all_params(&nets), |p| {
            oracle_translation(&with_params(&nets, p), &xf, &xp, kind)
        });
        w.update(rel_err(&analytic, &num), (l - oracle_translation(&nets, &xf, &xp, kind)).abs());
    }
    w
}

pub fn total() -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut w = Worst::default();
    for trial in 0..INSTANCES {
        let kind = if trial % 2 == 0 { PhraseLoss::CrossEntropy } else { PhraseLoss::Mse };
        let nets = small_nets(&mut rng, phrase_dim(kind));
        let n = rng.gen_range(1..5);
        let xf = random_matrix(&mut rng, n, 12, 1.0);
        let xp = phrase_batch(&mut rng, kind, n);
        let weights = LossWeights {
            k_r: rng.gen_range(0.1..2.0),
            k_z: rng.gen_range(0.1..2.0),
            k_t: rng.gen_range(0.1..2.0),
        };
        let c = ContrastiveParams { lambda: rng.gen_range(0.1..1.0), margin: rng.gen_range(0.5..2.0) };
        let (b, g) = total_loss(&nets, xf.view(), xp.view(), weights, c, kind).unwrap();
        let analytic: Vec<f64> = g.iter().iter().flat_map(|g| g.flat()).collect();
        let num = numeric_grad(&all_params(&nets), |p| {
            oracle_total(&with_params(&nets, p), &xf, &xp, weights, c, kind)
        });
        let value = (b.total - oracle_total(&nets, &xf, &xp, weights, c, kind)).abs();
        w.update(rel_err(&analytic, &num), value);
    }
    w
}
