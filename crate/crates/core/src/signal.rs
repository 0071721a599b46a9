//! Preprocessing from raw force profiles to network inputs and back.
//!
//! Pipeline: [`resample`] onto a uniform grid over the horizon (zero force after
//! the recording ends), [`integrate_impulse`] with the cumulative trapezoidal
//! rule, then per-axis min-max [`normalize`] to `[-1, 1]`.
//! [`impulse_to_force`] is the exact inverse of the integration step.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ForceMatrix, ForceProfile, ImpulseFeature, FEATURE_DIM, SAMPLES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid grid: n = {n}, horizon = {horizon}")]
    InvalidGrid { n: usize, horizon: f64 },
    #[error("expected a 3x{expected} force matrix, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error("non-finite value in force matrix")]
    NonFinite,
    #[error("cannot fit normalization on an empty corpus")]
    EmptyCorpus,
}

/// Time of grid point `i` on an `n`-point grid spanning `[0, horizon]`.
pub fn grid_time(i: usize, n: usize, horizon: f64) -> f64 {
    i as f64 * horizon / (n - 1) as f64
}

/// Sample the profile at `n` evenly spaced times over `[0, horizon]`.
///
/// Linear interpolation inside the recording; zero after its last timestamp.
pub fn resample(p: &ForceProfile, n: usize, horizon: f64) -> Result<ForceMatrix, SignalError> {
    if p.len() < 2 {
        return Err(SignalError::TooFewSamples(p.len()));
    }
    if n < 2 || !(horizon > 0.0) || !horizon.is_finite() {
        return Err(SignalError::InvalidGrid { n, horizon });
    }
    let ts = p.timestamps();
    let end = p.duration();
    let mut out = Array2::zeros((3, n));
    for i in 0..n {
        let t = grid_time(i, n, horizon);
        if t > end {
            continue;
        }
        // First index with ts[k] >= t; ts[0] = 0 <= t so k >= 0.
        let k = ts.partition_point(|&s| s < t);
        for (a, axis) in p.axes().into_iter().enumerate() {
            out[[a, i]] = if ts[k] == t || k == 0 {
                axis[k]
            } else {
                let (t0, t1) = (ts[k - 1], ts[k]);
                let w = (t - t0) / (t1 - t0);
                axis[k - 1] + w * (axis[k] - axis[k - 1])
            };
        }
    }
    Ok(out)
}

/// Resample with the default grid (256 points over 4 s).
pub fn resample_default(p: &ForceProfile) -> Result<ForceMatrix, SignalError> {
    resample(p, SAMPLES, crate::profile::HORIZON_S)
}

fn check_matrix(f: ArrayView2<'_, f64>) -> Result<(), SignalError> {
    if f.nrows() != 3 || f.ncols() != SAMPLES {
        return Err(SignalError::Shape { expected: SAMPLES, rows: f.nrows(), cols: f.ncols() });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(SignalError::NonFinite);
    }
    Ok(())
}

/// Cumulative trapezoid of `y` on a uniform grid with spacing `dt`; starts at 0.
pub fn cumulative_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in y.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(y.len());
    out
}

/// Per-axis cumulative impulse of a 3x256 force matrix, flattened `[Jx|Jy|Jz]`.
pub fn integrate_impulse(f: ArrayView2<'_, f64>, horizon: f64) -> Result<ImpulseFeature, SignalError> {
    check_matrix(f)?;
    let dt = horizon / (SAMPLES - 1) as f64;
    let mut values = Vec::with_capacity(FEATURE_DIM);
    for row in f.rows() {
        let row: Vec<f64> = row.to_vec();
        values.extend(cumulative_trapezoid(&row, dt));
    }
    Ok(ImpulseFeature::new(values).expect("finite input integrates to a finite feature"))
}

/// Raw profile to impulse feature on the default grid.
pub fn profile_to_impulse(p: &ForceProfile) -> Result<ImpulseFeature, SignalError> {
    let f = resample_default(p)?;
    integrate_impulse(f.view(), crate::profile::HORIZON_S)
}

/// Invert the cumulative trapezoid for one axis.
///
/// The trapezoid map has a one-dimensional null space (the alternating
/// sequence `(-1)^i`); of all exact preimages this returns the one orthogonal
/// to it, i.e. the minimum-norm solution. Input is taken relative to `j[0]`.
pub fn differentiate_trapezoid(j: &[f64], dt: f64) -> Vec<f64> {
    let n = j.len();
    if n == 0 {
        return Vec::new();
    }
    let mut g = vec![0.0; n];
    for i in 1..n {
        g[i] = 2.0 * (j[i] - j[i - 1]) / dt - g[i - 1];
    }
    let alt = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let c = -(0..n).map(|i| g[i] * alt(i)).sum::<f64>() / n as f64;
    (0..n).map(|i| g[i] + c * alt(i)).collect()
}

/// Force matrix whose trapezoidal integral reproduces `f`.
pub fn impulse_to_force(f: &ImpulseFeature, horizon: f64) -> ForceMatrix {
    let dt = horizon / (SAMPLES - 1) as f64;
    let mut out = Array2::zeros((3, SAMPLES));
    for a in 0..3 {
        for (i, v) in differentiate_trapezoid(f.axis(a), dt).into_iter().enumerate() {
            out[[a, i]] = v;
        }
    }
    out
}

/// Gaussian low-pass of each impulse axis (edge-replicated), re-anchored so
/// every axis starts at zero. `sigma` is in grid samples; `0` only re-anchors.
pub fn smooth_impulse(f: &ImpulseFeature, sigma: f64) -> ImpulseFeature {
    let mut values = Vec::with_capacity(FEATURE_DIM);
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = if sigma > 0.0 {
        let k: Vec<f64> = (-radius..=radius)
            .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.into_iter().map(|v| v / s).collect()
    } else {
        vec![1.0]
    };
    let radius = (kernel.len() / 2) as isize;
    for a in 0..3 {
        let axis = f.axis(a);
        let n = axis.len() as isize;
        let smoothed: Vec<f64> = (0..n)
            .map(|i| {
                kernel
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * axis[(i + k as isize - radius).clamp(0, n - 1) as usize])
                    .sum()
            })
            .collect();
        let base = smoothed[0];
        values.extend(smoothed.into_iter().map(|v| v - base));
    }
    ImpulseFeature::new(values).expect("smoothing preserves length and finiteness")
}

/// Per-axis impulse range over a training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl NormalizationParams {
    /// Identity-like parameters mapping `[-1, 1]` onto itself.
    pub fn unit() -> Self {
        Self { min: [-1.0; 3], max: [1.0; 3] }
    }

    fn span(&self, a: usize) -> f64 {
        self.max[a] - self.min[a]
    }

    /// Normalize a single value on axis `a`.
    pub fn forward(&self, a: usize, v: f64) -> f64 {
        2.0 * (v - self.min[a]) / self.span(a) - 1.0
    }

    pub fn inverse(&self, a: usize, v: f64) -> f64 {
        (v + 1.0) * 0.5 * self.span(a) + self.min[a]
    }
}

/// Min/max per axis over every sample of every feature. A flat axis gets the
/// range `(min, min + 1)`.
pub fn fit_normalizer(corpus: &[ImpulseFeature]) -> Result<NormalizationParams, SignalError> {
    if corpus.is_empty() {
        return Err(SignalError::EmptyCorpus);
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for f in corpus {
        for a in 0..3 {
            for &v in f.axis(a) {
                min[a] = min[a].min(v);
                max[a] = max[a].max(v);
            }
        }
    }
    for a in 0..3 {
        if min[a] == max[a] {
            max[a] = min[a] + 1.0;
        }
    }
    Ok(NormalizationParams { min, max })
}

/// Map an impulse feature into the dimensionless `[-1, 1]` training range.
pub fn normalize(f: &ImpulseFeature, np: &NormalizationParams) -> Vec<f64> {
    (0..3)
        .flat_map(|a| f.axis(a).iter().map(move |&v| np.forward(a, v)))
        .collect()
}

/// Inverse of [`normalize`]. Non-finite entries (from a diverged network) are
/// replaced by zero.
pub fn denormalize(x: &[f64], np: &NormalizationParams) -> ImpulseFeature {
    assert_eq!(x.len(), FEATURE_DIM, "normalized feature length");
    let values = x
        .chunks(SAMPLES)
        .enumerate()
        .flat_map(|(a, axis)| {
            axis.iter().map(move |&v| {
                let out = np.inverse(a, v);
                if out.is_finite() {
                    out
                } else {
                    0.0
                }
            })
        })
        .collect();
    ImpulseFeature::new(values).expect("length checked above")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::HORIZON_S;
    use proptest::prelude::*;

    fn profile_from_fn(t_end: f64, n: usize, f: impl Fn(f64) -> [f64; 3]) -> ForceProfile {
        let ts: Vec<f64> = (0..n).map(|i| i as f64 * t_end / (n - 1) as f64).collect();
        let vals: Vec<[f64; 3]> = ts.iter().map(|&t| f(t)).collect();
        ForceProfile::new(
            ts,
            vals.iter().map(|v| v[0]).collect(),
            vals.iter().map(|v| v[1]).collect(),
            vals.iter().map(|v| v[2]).collect(),
        )
        .unwrap()
    }

    fn matrix_from_fn(f: impl Fn(f64) -> [f64; 3]) -> ForceMatrix {
        let mut m = Array2::zeros((3, SAMPLES));
        for i in 0..SAMPLES {
            let v = f(grid_time(i, SAMPLES, HORIZON_S));
            for a in 0..3 {
                m[[a, i]] = v[a];
            }
        }
        m
    }

    #[test]
    fn resample_constant_profile() {
        let p = profile_from_fn(4.0, 50, |_| [1.0, 1.0, 1.0]);
        let m = resample_default(&p).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn resample_linear_profile_keeps_endpoints() {
        let p = profile_from_fn(4.0, 11, |t| [t / 2.0, 0.0, 0.0]);
        let m = resample_default(&p).unwrap();
        assert_eq!(m[[0, 0]], 0.0);
        assert!((m[[0, 255]] - 2.0).abs() < 1e-12);
        // Column 127/128 straddle t = 2.
        let mid = 0.5 * (m[[0, 127]] + m[[0, 128]]);
        assert!((mid - 1.0).abs() < 1e-12);
        for i in 0..SAMPLES {
            let t = grid_time(i, SAMPLES, HORIZON_S);
            assert!((m[[0, i]] - t / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_zero_extends_short_recordings() {
        let p = profile_from_fn(2.0, 201, |_| [1.0, 0.0, 0.0]);
        let m = resample_default(&p).unwrap();
        for i in 0..SAMPLES {
            let t = grid_time(i, SAMPLES, HORIZON_S);
            let expected = if t <= 2.0 { 1.0 } else { 0.0 };
            assert_eq!(m[[0, i]], expected, "t = {t}");
        }
    }

    #[test]
    fn resample_rejects_bad_grid() {
        let p = profile_from_fn(1.0, 3, |_| [0.0; 3]);
        assert!(matches!(resample(&p, 1, 4.0), Err(SignalError::InvalidGrid { .. })));
        assert!(matches!(resample(&p, 10, 0.0), Err(SignalError::InvalidGrid { .. })));
    }

    #[test]
    fn integrate_constant_and_linear() {
        let j = integrate_impulse(matrix_from_fn(|_| [1.0, 0.0, 0.0]).view(), HORIZON_S).unwrap();
        assert!((j.axis(0)[255] - 4.0).abs() < 1e-12);
        assert_eq!(j.axis(1)[255], 0.0);
        assert_eq!(j.axis(2)[255], 0.0);
        assert_eq!([j.axis(0)[0], j.axis(1)[0], j.axis(2)[0]], [0.0; 3]);

        let j = integrate_impulse(matrix_from_fn(|t| [t, 0.0, 0.0]).view(), HORIZON_S).unwrap();
        assert!((j.axis(0)[255] - 8.0).abs() < 1e-12);

        let j = integrate_impulse(Array2::zeros((3, SAMPLES)).view(), HORIZON_S).unwrap();
        assert!(j.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn integrate_rejects_bad_input() {
        assert!(matches!(
            integrate_impulse(Array2::zeros((3, 10)).view(), HORIZON_S),
            Err(SignalError::Shape { .. })
        ));
        let mut m = Array2::zeros((3, SAMPLES));
        m[[1, 3]] = f64::INFINITY;
        assert_eq!(integrate_impulse(m.view(), HORIZON_S), Err(SignalError::NonFinite));
    }

    #[test]
    fn constant_force_impulse_tracks_recorded_duration() {
        let p = profile_from_fn(2.5, 251, |_| [3.0, 0.0, 0.0]);
        let j = profile_to_impulse(&p).unwrap();
        let dt = HORIZON_S / 255.0;
        assert!((j.axis(0)[255] - 3.0 * 2.5).abs() <= 0.5 * dt * 3.0 + 1e-12);
    }

    #[test]
    fn fit_normalizer_examples() {
        let ramp = matrix_from_fn(|_| [1.0, 0.0, 0.0]);
        let j = integrate_impulse(ramp.view(), HORIZON_S).unwrap();
        let np = fit_normalizer(std::slice::from_ref(&j)).unwrap();
        assert_eq!(np.min, [0.0; 3]);
        assert!((np.max[0] - 4.0).abs() < 1e-12);
        assert_eq!(&np.max[1..], &[1.0, 1.0]);

        let mut v = vec![0.0; FEATURE_DIM];
        v[10] = -2.0;
        v[11] = 1.0;
        let g = ImpulseFeature::new(v).unwrap();
        let np = fit_normalizer(&[j, g]).unwrap();
        assert_eq!(np.min[0], -2.0);
        assert!((np.max[0] - 4.0).abs() < 1e-12);

        let np = fit_normalizer(&[ImpulseFeature::zeros()]).unwrap();
        assert_eq!(np, NormalizationParams { min: [0.0; 3], max: [1.0; 3] });
        assert_eq!(fit_normalizer(&[]), Err(SignalError::EmptyCorpus));
    }

    #[test]
    fn normalize_extremes_and_midpoint() {
        let np = NormalizationParams { min: [-2.0, 0.0, 1.0], max: [4.0, 3.0, 2.0] };
        let at = |vals: [f64; 3]| {
            let v: Vec<f64> = (0..3).flat_map(|a| std::iter::repeat(vals[a]).take(SAMPLES)).collect();
            ImpulseFeature::new(v).unwrap()
        };
        assert!(normalize(&at(np.min), &np).iter().all(|&v| v == -1.0));
        let mid = [0, 1, 2].map(|a| 0.5 * (np.min[a] + np.max[a]));
        assert!(normalize(&at(mid), &np).iter().all(|&v| v.abs() < 1e-15));
        let lo = denormalize(&vec![-1.0; FEATURE_DIM], &np);
        let hi = denormalize(&vec![1.0; FEATURE_DIM], &np);
        for a in 0..3 {
            assert!(lo.axis(a).iter().all(|&v| (v - np.min[a]).abs() < 1e-12));
            assert!(hi.axis(a).iter().all(|&v| (v - np.max[a]).abs() < 1e-12));
        }
    }

    #[test]
    fn differentiate_linear_ramp_is_constant() {
        let v: Vec<f64> = (0..3)
            .flat_map(|_| (0..SAMPLES).map(|i| grid_time(i, SAMPLES, HORIZON_S)))
            .collect();
        let f = impulse_to_force(&ImpulseFeature::new(v).unwrap(), HORIZON_S);
        assert!(f.iter().all(|&v| (v - 1.0).abs() < 1e-9));
        let z = impulse_to_force(&ImpulseFeature::zeros(), HORIZON_S);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smoothing_preserves_smooth_profiles() {
        let m = matrix_from_fn(|t| {
            let s = if t < 2.0 { 5.0 * (std::f64::consts::PI * t / 2.0).sin() } else { 0.0 };
            [s, -s, 0.5 * s]
        });
        let j = integrate_impulse(m.view(), HORIZON_S).unwrap();
        let s = smooth_impulse(&j, 2.0);
        let max = j.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = j.as_slice().iter().zip(s.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.01 * max, "err {err}");
        assert_eq!(s.axis(0)[0], 0.0);
    }

    proptest! {
        #[test]
        fn integration_is_linear(
            alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
            a in proptest::collection::vec(-10.0f64..10.0, 3 * SAMPLES),
            b in proptest::collection::vec(-10.0f64..10.0, 3 * SAMPLES),
        ) {
            let fa = Array2::from_shape_vec((3, SAMPLES), a).unwrap();
            let fb = Array2::from_shape_vec((3, SAMPLES), b).unwrap();
            let combo = &fa * alpha + &fb * beta;
            let jc = integrate_impulse(combo.view(), HORIZON_S).unwrap();
            let ja = integrate_impulse(fa.view(), HORIZON_S).unwrap();
            let jb = integrate_impulse(fb.view(), HORIZON_S).unwrap();
            for i in 0..FEATURE_DIM {
                let expected = alpha * ja.as_slice()[i] + beta * jb.as_slice()[i];
                prop_assert!((jc.as_slice()[i] - expected).abs() < 1e-9);
            }
        }

        #[test]
        fn normalize_round_trips(
            v in proptest::collection::vec(-50.0f64..50.0, FEATURE_DIM),
            lo in proptest::array::uniform3(-20.0f64..0.0),
            width in proptest::array::uniform3(0.1f64..40.0),
        ) {
            let np = NormalizationParams { min: lo, max: [0, 1, 2].map(|a| lo[a] + width[a]) };
            let f = ImpulseFeature::new(v).unwrap();
            let back = denormalize(&normalize(&f, &np), &np);
            for (x, y) in f.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
