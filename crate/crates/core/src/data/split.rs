use rand::seq::SliceRandom;

use super::{DataError, PairedSample};
use crate::rng::rng_from;
use crate::vocab::{Direction, Modifier};

/// Random train/test partition with `round(test_fraction * n)` test samples.
pub fn split_random(
    samples: &[PairedSample],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<PairedSample>, Vec<PairedSample>), DataError> {
    let n = samples.len();
    if n < 2 {
        return Err(DataError::TooFewSamples { needed: 2, got: n });
    }
    let k = (test_fraction * n as f64).round();
    if !(k >= 1.0 && k < n as f64) {
        return Err(DataError::DegenerateSplit { n, fraction: test_fraction });
    }
    let k = k as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    let test = order[..k].iter().map(|&i| samples[i].clone()).collect();
    let train = order[k..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, test))
}

/// A single vocabulary token in a given slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoldoutToken {
    Modifier(Modifier),
    Direction(Direction),
}

impl HoldoutToken {
    pub fn matches(&self, s: &PairedSample) -> bool {
        match *self {
            HoldoutToken::Modifier(m) => s.phrase.modifier == Some(m),
            HoldoutToken::Direction(d) => s.phrase.direction == Some(d),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            HoldoutToken::Modifier(m) => m.as_str(),
            HoldoutToken::Direction(d) => d.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: Vec<PairedSample>,
    pub test: Vec<PairedSample>,
    /// Set when no sample carries the token.
    pub token_absent: bool,
}

/// Test side: every sample carrying `token` in its slot (exact token match,
/// compounds are separate tokens). Train side: everything else. Order is kept.
pub fn split_holdout_token(samples: &[PairedSample], token: HoldoutToken) -> HoldoutSplit {
    let (test, train): (Vec<_>, Vec<_>) = samples.iter().cloned().partition(|s| token.matches(s));
    let token_absent = test.is_empty();
    if token_absent {
        log::warn!("held-out token {:?} does not occur in the corpus", token.as_str());
    }
    HoldoutSplit { train, test, token_absent }
}
