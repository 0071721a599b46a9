//! Non-neural baseline: per-slot linear classifiers on the final impulse for
//! force -> phrase, nearest stored exemplar for phrase -> force.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lang::EMPTY_SLOT;
use crate::vocab::{Direction, Modifier, Phrase};

/// One-vs-rest linear classifier over 3-dim inputs. Only classes seen in
/// training exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvr {
    /// Slot index per class (vocabulary index, or the empty slot).
    pub classes: Vec<usize>,
    /// `[w0, w1, w2, b]` per class.
    pub weights: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 200, l2: 1e-4 }
    }
}

impl LinearOvr {
    /// Hinge-loss subgradient descent, one sample at a time in a seeded order.
    /// Returns the classifier and the mean hinge loss of each epoch.
    pub fn fit(x: &[[f64; 3]], y: &[usize], params: SvmParams, rng: &mut ChaCha8Rng) -> (Self, Vec<f64>) {
        assert_eq!(x.len(), y.len());
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let mut weights = vec![[0.0; 4]; classes.len()];
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut history = Vec::with_capacity(params.epochs);
        let lr = params.learning_rate;
        for _ in 0..params.epochs {
            order.shuffle(rng);
            let mut hinge = 0.0;
            for &i in &order {
                for (c, w) in classes.iter().zip(weights.iter_mut()) {
                    let target = if y[i] == *c { 1.0 } else { -1.0 };
                    let margin = target * score(w, &x[i]);
                    for k in 0..3 {
                        w[k] -= lr * params.l2 * w[k];
                    }
                    if margin < 1.0 {
                        hinge += 1.0 - margin;
                        for k in 0..3 {
                            w[k] += lr * target * x[i][k];
                        }
                        w[3] += lr * target;
                    }
                }
            }
            history.push(hinge / x.len().max(1) as f64);
        }
        (Self { classes, weights }, history)
    }

    /// Highest-scoring class; ties go to the lower slot index.
    pub fn predict(&self, x: &[f64; 3]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, w) in self.weights.iter().enumerate() {
            let s = score(w, x);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        self.classes[best]
    }
}

fn score(w: &[f64; 4], x: &[f64; 3]) -> f64 {
    w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3]
}

pub fn modifier_slot(m: Option<Modifier>) -> usize {
    m.map_or(EMPTY_SLOT, Modifier::index)
}

pub fn direction_slot(d: Option<Direction>) -> usize {
    d.map_or(EMPTY_SLOT, Direction::index)
}

/// A training phrase with its final impulse in N*s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub phrase: Phrase,
    pub impulse: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmKnn {
    pub modifier: LinearOvr,
    pub direction: LinearOvr,
    pub exemplars: Vec<Exemplar>,
}

impl SvmKnn {
    /// `features` are normalized final impulses, `exemplars` carry the raw ones.
    pub fn fit(
        features: &[[f64; 3]],
        exemplars: Vec<Exemplar>,
        params: SvmParams,
        rng: &mut ChaCha8Rng,
    ) -> (Self, Vec<f64>) {
        let ym: Vec<usize> = exemplars.iter().map(|e| modifier_slot(e.phrase.modifier)).collect();
        let yd: Vec<usize> = exemplars.iter().map(|e| direction_slot(e.phrase.direction)).collect();
        let (modifier, hm) = LinearOvr::fit(features, &ym, params, rng);
        let (direction, hd) = LinearOvr::fit(features, &yd, params, rng);
        let history = hm.iter().zip(&hd).map(|(a, b)| a + b).collect();
        (Self { modifier, direction, exemplars }, history)
    }

    pub fn classify(&self, feature: &[f64; 3]) -> Phrase {
        Phrase::new(
            Modifier::from_index(self.modifier.predict(feature)),
            Direction::from_index(self.direction.predict(feature)),
        )
    }

    /// Final impulse recalled for `phrase`: among the exemplars sharing the
    /// most labels with it (both slots, else direction, else modifier, else
    /// all), the one closest to that group's mean impulse.
    pub fn recall(&self, phrase: &Phrase) -> [f64; 3] {
        let tiers: [&dyn Fn(&Exemplar) -> bool; 4] = [
            &|e| e.phrase == *phrase,
            &|e| e.phrase.direction == phrase.direction,
            &|e| e.phrase.modifier == phrase.modifier,
            &|_| true,
        ];
        for tier in tiers {
            let group: Vec<&Exemplar> = self.exemplars.iter().filter(|e| tier(e)).collect();
            if group.is_empty() {
                continue;
            }
            let n = group.len() as f64;
            let mut centre = [0.0; 3];
            for e in &group {
                for k in 0..3 {
                    centre[k] += e.impulse[k] / n;
                }
            }
            let dist = |e: &Exemplar| (0..3).map(|k| (e.impulse[k] - centre[k]).powi(2)).sum::<f64>();
            let mut best = group[0];
            for e in &group[1..] {
                if dist(e) < dist(best) {
                    best = e;
                }
            }
            return best.impulse;
        }
        [0.0; 3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn separable_axes_are_learned_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, d) in Direction::BASIC.iter().enumerate() {
            for s in [0.2, 0.5, 0.9] {
                x.push(d.unit_vector().map(|v| v * s));
                y.push(c);
            }
        }
        let (ovr, history) = LinearOvr::fit(&x, &y, SvmParams::default(), &mut rng);
        assert_eq!(history.len(), 200);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(ovr.predict(xi), *yi);
        }
    }

    #[test]
    fn single_class_always_predicted() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (ovr, _) = LinearOvr::fit(&[[1.0, 0.0, 0.0]], &[7], SvmParams::default(), &mut rng);
        assert_eq!(ovr.predict(&[0.0; 3]), 7);
    }

    #[test]
    fn recall_prefers_label_matches() {
        let fwd = Phrase::new(None, Some(Direction::Forward));
        let model = SvmKnn {
            modifier: LinearOvr { classes: vec![EMPTY_SLOT], weights: vec![[0.0; 4]] },
            direction: LinearOvr { classes: vec![Direction::Forward.index()], weights: vec![[0.0; 4]] },
            exemplars: vec![
                Exemplar { phrase: Phrase::new(None, Some(Direction::Up)), impulse: [0.0, 0.0, 3.0] },
                Exemplar { phrase: fwd, impulse: [0.0, 6.0, 0.0] },
                Exemplar {
                    phrase: Phrase::new(Some(Modifier::Quickly), Some(Direction::Forward)),
                    impulse: [0.0, 9.0, 0.0],
                },
            ],
        };
        assert_eq!(model.recall(&fwd), [0.0, 6.0, 0.0]);
        let slow_fwd = Phrase::new(Some(Modifier::Slowly), Some(Direction::Forward));
        // direction tier: centre (0, 7.5, 0), nearest exemplar first on ties
        assert_eq!(model.recall(&slow_fwd), [0.0, 6.0, 0.0]);
        let slow_left = Phrase::new(Some(Modifier::Slowly), Some(Direction::Left));
        assert!(model.exemplars.iter().any(|e| e.impulse == model.recall(&slow_left)));
    }
}
