use serde::{Deserialize, Serialize};

use super::{invalid, ClassifierError};
use crate::matrix::{squared_distance, Matrix};

pub const DISTANCE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

impl KnnParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if self.k == 0 {
            return Err(invalid("knn.k", "must be at least 1"));
        }
        Ok(())
    }
}

/// Brute-force k nearest neighbors with inverse-distance vote weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    n_classes: usize,
    samples: Matrix,
    targets: Vec<usize>,
}

impl Knn {
    pub(super) fn fit(params: &KnnParams, x: &Matrix, targets: &[usize], n_classes: usize) -> Self {
        Knn {
            k: params.k,
            n_classes,
            samples: x.clone(),
            targets: targets.to_vec(),
        }
    }

    /// Indices of the k nearest stored samples, nearest first; equal
    /// distances are ordered by sample index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .samples
            .iter_rows()
            .map(|s| squared_distance(s, query))
            .enumerate()
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(i, sq)| (i, sq.sqrt())).collect()
    }

    pub(super) fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for (i, q) in x.iter_rows().enumerate() {
            let row = out.row_mut(i);
            for (j, dist) in self.neighbors(q) {
                row[self.targets[j]] += 1.0 / (dist + DISTANCE_EPSILON);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_neighbor_recovers_training_labels() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0], [7.0]], 1);
        let targets = [0, 1, 0, 1];
        let m = Knn::fit(&KnnParams { k: 1 }, &x, &targets, 2);
        let s = m.scores(&x);
        for (i, &t) in targets.iter().enumerate() {
            assert!(s.get(i, t) > s.get(i, 1 - t));
        }
    }

    #[test]
    fn weights_are_inverse_distances() {
        let x = Matrix::from_rows(&[[0.0], [2.0], [5.0]], 1);
        let m = Knn::fit(&KnnParams { k: 2 }, &x, &[0, 1, 1], 2);
        let s = m.scores(&Matrix::from_rows(&[[1.5]], 1));
        assert!((s.get(0, 0) - 1.0 / (1.5 + DISTANCE_EPSILON)).abs() < 1e-12);
        assert!((s.get(0, 1) - 1.0 / (0.5 + DISTANCE_EPSILON)).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_sample_count_uses_all() {
        let x = Matrix::from_rows(&[[0.0], [1.0]], 1);
        let m = Knn::fit(&KnnParams { k: 10 }, &x, &[0, 1], 2);
        assert_eq!(m.neighbors(&[0.2]).len(), 2);
    }
}
