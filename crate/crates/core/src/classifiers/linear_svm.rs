use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, ClassifierError};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        LinearSvmParams {
            lambda: 1e-4,
            epochs: 100,
        }
    }
}

impl LinearSvmParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid(
                "linear_svm.lambda",
                "must be a positive finite number",
            ));
        }
        if self.epochs == 0 {
            return Err(invalid("linear_svm.epochs", "must be at least 1"));
        }
        Ok(())
    }
}

/// Regularized hinge objective `λ/2 (|w|² + b²) + mean(max(0, 1 − y(w·x + b)))`.
///
/// The bias is treated as one more weight on a constant feature, so it is
/// regularized along with `w`.
pub fn hinge_objective(w: &[f64], b: f64, x: &Matrix, y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (dot(w, w) + b * b);
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, &t)| (1.0 - t * (dot(w, r) + b)).max(0.0))
        .sum();
    reg + loss / x.rows() as f64
}

#[derive(Debug, Clone)]
pub struct PegasosFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective of the returned iterate after each epoch.
    pub objectives: Vec<f64>,
}

/// Binary Pegasos: per-sample subgradient steps of size 1/(λt) over
/// seeded epoch shuffles, projected onto the ball of radius 1/√λ. The
/// returned model is the running average of all iterates.
pub fn pegasos_binary(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    epochs: usize,
    rng: &mut impl RngCore,
) -> PegasosFit {
    let (n, d) = (x.rows(), x.cols());
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut sum_w = vec![0.0; d];
    let mut sum_b = 0.0;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut objectives = Vec::with_capacity(epochs);
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let margin = y[i] * (dot(&w, row) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                let step = eta * y[i];
                w.iter_mut().zip(row).for_each(|(v, &r)| *v += step * r);
                b += step;
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
            sum_w.iter_mut().zip(&w).for_each(|(s, &v)| *s += v);
            sum_b += b;
        }
        let inv = 1.0 / t as f64;
        avg_w
            .iter_mut()
            .zip(&sum_w)
            .for_each(|(a, &s)| *a = s * inv);
        avg_b = sum_b * inv;
        objectives.push(hinge_objective(&avg_w, avg_b, x, y, lambda));
    }
    PegasosFit {
        weights: avg_w,
        bias: avg_b,
        objectives,
    }
}

/// One-vs-rest linear SVM. Binary problems use a single machine whose
/// positive side is the higher class code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    n_classes: usize,
    weights: Matrix,
    biases: Vec<f64>,
}

impl LinearSvm {
    /// Builds a model from explicit hyperplanes, one row per machine.
    pub fn from_hyperplanes(n_classes: usize, weights: Matrix, biases: Vec<f64>) -> Self {
        let machines = if n_classes == 2 {
            1
        } else if n_classes == 1 {
            0
        } else {
            n_classes
        };
        assert_eq!(weights.rows(), machines, "machine count");
        assert_eq!(biases.len(), machines, "bias count");
        LinearSvm {
            n_classes,
            weights,
            biases,
        }
    }

    pub(super) fn fit(
        params: &LinearSvmParams,
        x: &Matrix,
        targets: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let positives: Vec<usize> = match n_classes {
            1 => vec![],
            2 => vec![1],
            c => (0..c).collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Matrix::zeros(positives.len(), x.cols());
        let mut biases = Vec::with_capacity(positives.len());
        for (m, &pos) in positives.iter().enumerate() {
            let y: Vec<f64> = targets
                .iter()
                .map(|&t| if t == pos { 1.0 } else { -1.0 })
                .collect();
            let fit = pegasos_binary(x, &y, params.lambda, params.epochs, &mut rng);
            weights.row_mut(m).copy_from_slice(&fit.weights);
            biases.push(fit.bias);
        }
        LinearSvm {
            n_classes,
            weights,
            biases,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Signed margins; for two classes the columns are `[-f, f]`.
    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for (i, r) in x.iter_rows().enumerate() {
            let row = out.row_mut(i);
            match self.n_classes {
                1 => {}
                2 => {
                    let f = dot(self.weights.row(0), r) + self.biases[0];
                    row[0] = -f;
                    row[1] = f;
                }
                _ => {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = dot(self.weights.row(c), r) + self.biases[c];
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_hyperplane_margin() {
        let m = LinearSvm::from_hyperplanes(2, Matrix::from_rows(&[[1.0, 0.0]], 2), vec![0.0]);
        let s = m.scores(&Matrix::from_rows(&[[2.0, 0.0]], 2));
        assert_eq!(s.row(0), &[-2.0, 2.0]);
    }

    #[test]
    fn objective_counts_bias_in_regularizer() {
        let x = Matrix::from_rows(&[[1.0]], 1);
        let v = hinge_objective(&[2.0], 1.0, &x, &[1.0], 0.5);
        assert!((v - 0.25 * 5.0).abs() < 1e-15);
    }
}
