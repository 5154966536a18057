use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, ClassifierError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![100, 25],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 200,
        }
    }
}

impl MlpParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if self.hidden.contains(&0) {
            return Err(invalid("mlp.hidden", "layer sizes must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid(
                "mlp.learning_rate",
                "must be a positive finite number",
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(invalid("mlp.beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("mlp.beta2", "must lie in [0, 1)"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid("mlp.epsilon", "must be a positive finite number"));
        }
        if self.batch_size == 0 {
            return Err(invalid("mlp.batch_size", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("mlp.epochs", "must be at least 1"));
        }
        Ok(())
    }
}

/// Fully connected network with ReLU hidden layers and a softmax output.
///
/// Parameters live in one flat vector: for each layer, its `out × in`
/// weight matrix row-major followed by its `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Mlp {
    /// He-uniform weights (limit √(6/fan_in)), zero biases.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in.max(1) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Mlp {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for w in self.sizes.windows(2) {
            off.push(off.last().unwrap() + w[0] * w[1] + w[1]);
        }
        off
    }

    /// Pre-activations of every layer for one input.
    fn forward(&self, x: &[f64], offsets: &[usize]) -> Vec<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(layers);
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offsets[l]..offsets[l] + n_in * n_out];
            let b = &self.params[offsets[l] + n_in * n_out..offsets[l + 1]];
            let z: Vec<f64> = {
                let input: Vec<f64> = if l == 0 {
                    x.to_vec()
                } else {
                    zs[l - 1].iter().map(|v| v.max(0.0)).collect()
                };
                (0..n_out)
                    .map(|o| {
                        b[o] + w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(&input)
                            .map(|(a, c)| a * c)
                            .sum::<f64>()
                    })
                    .collect()
            };
            zs.push(z);
        }
        zs
    }

    fn log_softmax(z: &[f64]) -> Vec<f64> {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        z.iter().map(|v| v - lse).collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let zs = self.forward(x, &self.layer_offsets());
        Self::log_softmax(zs.last().unwrap())
            .into_iter()
            .map(f64::exp)
            .collect()
    }

    /// Mean cross-entropy over the given rows and its gradient with respect
    /// to the flat parameter vector.
    pub fn loss_and_gradients(&self, x: &Matrix, targets: &[usize]) -> (f64, Vec<f64>) {
        self.batch_gradients(x, targets, &(0..x.rows()).collect::<Vec<_>>())
    }

    fn batch_gradients(&self, x: &Matrix, targets: &[usize], batch: &[usize]) -> (f64, Vec<f64>) {
        let offsets = self.layer_offsets();
        let layers = self.sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for &i in batch {
            let input = x.row(i);
            let zs = self.forward(input, &offsets);
            let logp = Self::log_softmax(&zs[layers - 1]);
            loss -= logp[targets[i]];
            let mut delta: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
            delta[targets[i]] -= 1.0;
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let a_prev: Vec<f64> = if l == 0 {
                    input.to_vec()
                } else {
                    zs[l - 1].iter().map(|v| v.max(0.0)).collect()
                };
                let w_off = offsets[l];
                let b_off = w_off + n_in * n_out;
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        let g = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                        g.iter_mut().zip(&a_prev).for_each(|(g, a)| *g += d * a);
                    }
                    grad[b_off + o] += d;
                }
                if l > 0 {
                    let w = &self.params[w_off..b_off];
                    let mut prev = vec![0.0; n_in];
                    for o in 0..n_out {
                        let d = delta[o];
                        if d != 0.0 {
                            prev.iter_mut()
                                .zip(&w[o * n_in..(o + 1) * n_in])
                                .for_each(|(p, w)| *p += d * w);
                        }
                    }
                    for (p, z) in prev.iter_mut().zip(&zs[l - 1]) {
                        if *z <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }

    fn adam_step(&mut self, adam: &mut Adam, grad: &[f64], p: &MlpParams) {
        adam.t += 1;
        let c1 = 1.0 - p.beta1.powi(adam.t);
        let c2 = 1.0 - p.beta2.powi(adam.t);
        for (k, &g) in grad.iter().enumerate() {
            adam.m[k] = p.beta1 * adam.m[k] + (1.0 - p.beta1) * g;
            adam.v[k] = p.beta2 * adam.v[k] + (1.0 - p.beta2) * g * g;
            let m_hat = adam.m[k] / c1;
            let v_hat = adam.v[k] / c2;
            self.params[k] -= p.learning_rate * m_hat / (v_hat.sqrt() + p.epsilon);
        }
    }

    pub(super) fn fit(
        params: &MlpParams,
        x: &Matrix,
        targets: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![x.cols()];
        sizes.extend(&params.hidden);
        sizes.push(n_classes);
        let mut net = Mlp::new(&sizes, &mut rng);
        let mut adam = Adam {
            m: vec![0.0; net.params.len()],
            v: vec![0.0; net.params.len()],
            t: 0,
        };
        let mut order: Vec<usize> = (0..x.rows()).collect();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let (_, grad) = net.batch_gradients(x, targets, batch);
                net.adam_step(&mut adam, &grad, params);
            }
        }
        net
    }

    /// Softmax class probabilities per row.
    pub fn scores(&self, x: &Matrix) -> Matrix {
        let c = *self.sizes.last().unwrap();
        let mut out = Matrix::zeros(x.rows(), c);
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.probabilities(r));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_layout() {
        let net = Mlp::new(&[4, 3, 2], &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(net.params().len(), 4 * 3 + 3 + 3 * 2 + 2);
    }

    #[test]
    fn he_uniform_bounds() {
        let net = Mlp::new(&[6, 50], &mut ChaCha8Rng::seed_from_u64(1));
        assert!(net.params()[..300].iter().all(|w| w.abs() <= 1.0));
        assert!(net.params()[300..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let net = Mlp::new(&[3, 5, 4], &mut ChaCha8Rng::seed_from_u64(2));
        let p = net.probabilities(&[0.3, -2.0, 7.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
