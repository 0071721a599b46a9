//! Raw force records and the fixed-size impulse feature derived from them.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resampled time steps per axis.
pub const SAMPLES: usize = 256;
/// Resampling horizon in seconds.
pub const HORIZON_S: f64 = 4.0;
/// Length of a flattened impulse feature, `[Jx | Jy | Jz]`.
pub const FEATURE_DIM: usize = 3 * SAMPLES;

/// 3 x n matrix of forces in Newtons, rows x, y, z.
pub type ForceMatrix = Array2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("force profile needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("array length mismatch: {timestamps} timestamps vs fx/fy/fz of {fx}/{fy}/{fz}")]
    LengthMismatch { timestamps: usize, fx: usize, fy: usize, fz: usize },
    #[error("first timestamp must be 0, got {0}")]
    NonZeroStart(f64),
    #[error("timestamps must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("impulse feature must have {FEATURE_DIM} values, got {0}")]
    FeatureLength(usize),
}

/// Timestamped three-axis force samples of one interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceProfile {
    timestamps: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fz: Vec<f64>,
}

impl ForceProfile {
    pub fn new(
        timestamps: Vec<f64>,
        fx: Vec<f64>,
        fy: Vec<f64>,
        fz: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        let n = timestamps.len();
        if fx.len() != n || fy.len() != n || fz.len() != n {
            return Err(ProfileError::LengthMismatch {
                timestamps: n,
                fx: fx.len(),
                fy: fy.len(),
                fz: fz.len(),
            });
        }
        if n < 2 {
            return Err(ProfileError::TooShort(n));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(ProfileError::NonFinite("timestamps"));
        }
        if timestamps[0] != 0.0 {
            return Err(ProfileError::NonZeroStart(timestamps[0]));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ProfileError::NotIncreasing(i + 1));
        }
        for (name, axis) in [("fx", &fx), ("fy", &fy), ("fz", &fz)] {
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(ProfileError::NonFinite(name));
            }
        }
        Ok(Self { timestamps, fx, fy, fz })
    }

    /// A profile of zero force sampled uniformly over `duration` seconds.
    pub fn zeros(duration: f64, samples: usize) -> Self {
        let samples = samples.max(2);
        let timestamps = (0..samples)
            .map(|i| i as f64 * duration / (samples - 1) as f64)
            .collect();
        Self {
            timestamps,
            fx: vec![0.0; samples],
            fy: vec![0.0; samples],
            fz: vec![0.0; samples],
        }
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn fx(&self) -> &[f64] {
        &self.fx
    }

    pub fn fy(&self) -> &[f64] {
        &self.fy
    }

    pub fn fz(&self) -> &[f64] {
        &self.fz
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.fx, &self.fy, &self.fz]
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Last timestamp (T).
    pub fn duration(&self) -> f64 {
        *self.timestamps.last().expect("profile has samples")
    }

    /// Total impulse over the recorded span, trapezoidal rule on the raw samples.
    pub fn final_impulse(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, axis) in out.iter_mut().zip(self.axes()) {
            *o = self
                .timestamps
                .windows(2)
                .zip(axis.windows(2))
                .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
                .sum();
        }
        out
    }

    /// Largest force norm over the samples.
    pub fn peak_force(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.fx[i].powi(2) + self.fy[i].powi(2) + self.fz[i].powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Cumulative impulse profile, flattened as `[Jx(256) | Jy(256) | Jz(256)]`
/// in Newton-seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ImpulseFeature(Vec<f64>);

impl ImpulseFeature {
    pub fn new(values: Vec<f64>) -> Result<Self, ProfileError> {
        if values.len() != FEATURE_DIM {
            return Err(ProfileError::FeatureLength(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProfileError::NonFinite("impulse feature"));
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; FEATURE_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Samples of one axis (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, a: usize) -> &[f64] {
        &self.0[a * SAMPLES..(a + 1) * SAMPLES]
    }

    /// J(T): the last sample of each axis.
    pub fn final_impulse(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.axis(a)[SAMPLES - 1])
    }
}

impl TryFrom<Vec<f64>> for ImpulseFeature {
    type Error = ProfileError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ImpulseFeature> for Vec<f64> {
    fn from(f: ImpulseFeature) -> Self {
        f.0
    }
}
