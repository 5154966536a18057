use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{GrowParams, Tree};
use super::{invalid, ClassifierError};
use crate::matrix::Matrix;

/// Stage weight used when a stump makes no weighted error.
pub const PERFECT_STAGE_WEIGHT: f64 = 27.631021115928547; // ln(1e12)

/// Rounds whose error is within this of chance count as chance.
const CHANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaBoostParams {
    pub rounds: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams { rounds: 50 }
    }
}

impl AdaBoostParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if self.rounds == 0 {
            return Err(invalid("adaboost.rounds", "must be at least 1"));
        }
        Ok(())
    }
}

/// Multiclass SAMME over weighted depth-1 stumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    n_classes: usize,
    stumps: Vec<Tree>,
    stage_weights: Vec<f64>,
    /// Weighted error of each accepted stump.
    round_errors: Vec<f64>,
    /// Class predicted when no stump was accepted.
    fallback: usize,
}

impl AdaBoost {
    pub(super) fn fit(
        params: &AdaBoostParams,
        x: &Matrix,
        targets: &[usize],
        n_classes: usize,
    ) -> Self {
        let n = x.rows();
        let grow = GrowParams {
            max_depth: 1,
            min_samples_split: 2,
            max_features: None,
        };
        let mut weights = vec![1.0 / n as f64; n];
        let mut counts = vec![0usize; n_classes];
        targets.iter().for_each(|&t| counts[t] += 1);
        let fallback = (0..n_classes).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
        let mut model = AdaBoost {
            n_classes,
            stumps: vec![],
            stage_weights: vec![],
            round_errors: vec![],
            fallback,
        };
        let chance = 1.0 - 1.0 / n_classes as f64;
        for _ in 0..params.rounds {
            let mut samples: Vec<usize> = (0..n).collect();
            let stump = Tree::grow::<ChaCha8Rng>(
                x,
                targets,
                &weights,
                &mut samples,
                n_classes,
                &grow,
                None,
            );
            let miss: Vec<bool> = (0..n)
                .map(|i| stump.predict_one(x.row(i)) != targets[i])
                .collect();
            let total: f64 = weights.iter().sum();
            let err = weights
                .iter()
                .zip(&miss)
                .filter(|(_, &m)| m)
                .map(|(w, _)| w)
                .sum::<f64>()
                / total;
            if err <= 0.0 {
                model.push(stump, PERFECT_STAGE_WEIGHT, 0.0);
                break;
            }
            if err >= chance - CHANCE_TOLERANCE {
                break;
            }
            let alpha = ((1.0 - err) / err).ln() + ((n_classes - 1) as f64).ln();
            let boost = alpha.exp();
            for (w, &m) in weights.iter_mut().zip(&miss) {
                if m {
                    *w *= boost;
                }
            }
            let sum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= sum);
            model.push(stump, alpha, err);
        }
        model
    }

    fn push(&mut self, stump: Tree, alpha: f64, err: f64) {
        self.stumps.push(stump);
        self.stage_weights.push(alpha);
        self.round_errors.push(err);
    }

    pub fn stage_weights(&self) -> &[f64] {
        &self.stage_weights
    }

    pub fn round_errors(&self) -> &[f64] {
        &self.round_errors
    }

    pub fn stumps(&self) -> &[Tree] {
        &self.stumps
    }

    /// Sum of stage weights of the stumps voting for each class.
    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for (i, r) in x.iter_rows().enumerate() {
            let row = out.row_mut(i);
            if self.stumps.is_empty() {
                row[self.fallback] = 1.0;
            }
            for (s, &a) in self.stumps.iter().zip(&self.stage_weights) {
                row[s.predict_one(r)] += a;
            }
        }
        out
    }
}
