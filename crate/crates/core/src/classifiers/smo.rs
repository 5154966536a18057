use log::warn;
use serde::{Deserialize, Serialize};

use super::{invalid, ClassifierError};
use crate::matrix::{squared_distance, Matrix};

/// Curvature floor for pairs whose kernel rows coincide.
pub const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSvmParams {
    pub c: f64,
    /// Kernel width; `None` means 1/d.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for GaussianSvmParams {
    fn default() -> Self {
        GaussianSvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl GaussianSvmParams {
    pub(super) fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid(
                "gaussian_svm.c",
                "must be a positive finite number",
            ));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(invalid(
                    "gaussian_svm.gamma",
                    "must be a positive finite number",
                ));
            }
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid(
                "gaussian_svm.tol",
                "must be a positive finite number",
            ));
        }
        if self.max_passes == 0 {
            return Err(invalid("gaussian_svm.max_passes", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

pub fn rbf_kernel_matrix(x: &Matrix, gamma: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective after each pair update (first entry is the start, 0).
    pub dual_history: Vec<f64>,
}

/// Solves the binary soft-margin dual
/// `max Σα − ½ ΣΣ α_i α_j y_i y_j K_ij` s.t. `0 ≤ α ≤ C`, `Σ y α = 0`
/// by pairwise updates on the maximal violating pair, stopping once the
/// violation gap is at most `tol` or after `max_iter` updates.
pub fn solve_smo(
    kernel: &Matrix,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    record: bool,
) -> SmoSolution {
    let n = y.len();
    assert_eq!(kernel.rows(), n);
    let mut alpha = vec![0.0; n];
    // Gradient of the minimization form f(α) = ½ αᵀQα − Σα.
    let mut grad = vec![-1.0; n];
    let mut f = 0.0;
    let mut history = if record { vec![0.0] } else { Vec::new() };
    let mut iterations = 0;
    let mut converged = false;
    let in_up = |a: f64, t: f64| (t > 0.0 && a < c) || (t < 0.0 && a > 0.0);
    let in_low = |a: f64, t: f64| (t > 0.0 && a > 0.0) || (t < 0.0 && a < c);
    loop {
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > m {
                    m = v;
                    i = t;
                }
            }
        }
        let mut j = usize::MAX;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v < big_m {
                    big_m = v;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || m - big_m <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        let gap = m - big_m;
        let curvature = kernel.get(i, i) + kernel.get(j, j) - 2.0 * kernel.get(i, j);
        // Moving δ along (α_i += y_i δ, α_j −= y_j δ) keeps Σyα fixed.
        let bound_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let bound_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let mut delta = gap / curvature.max(TAU);
        let mut clip_i = false;
        let mut clip_j = false;
        if delta >= bound_i {
            delta = bound_i;
            clip_i = true;
        }
        if delta >= bound_j {
            delta = bound_j;
            clip_j = true;
            clip_i = bound_i == bound_j;
        }
        alpha[i] += y[i] * delta;
        alpha[j] -= y[j] * delta;
        if clip_i {
            alpha[i] = if y[i] > 0.0 { c } else { 0.0 };
        }
        if clip_j {
            alpha[j] = if y[j] > 0.0 { 0.0 } else { c };
        }
        for t in 0..n {
            grad[t] += y[t] * delta * (kernel.get(t, i) - kernel.get(t, j));
        }
        f += -delta * gap + 0.5 * curvature.max(0.0) * delta * delta;
        if record {
            history.push(-f);
        }
    }
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free += 1;
        } else {
            // Bounds on b from the samples pinned at 0 or C.
            let up_only = (y[t] > 0.0) == (alpha[t] <= 0.0);
            if up_only {
                lb = lb.max(v);
            } else {
                ub = ub.min(v);
            }
        }
    }
    let bias = if free > 0 {
        free_sum / free as f64
    } else if lb.is_finite() && ub.is_finite() {
        0.5 * (lb + ub)
    } else if lb.is_finite() {
        lb
    } else if ub.is_finite() {
        ub
    } else {
        0.0
    };
    SmoSolution {
        alpha,
        bias,
        iterations,
        converged,
        dual_history: history,
    }
}

/// Per-sample KKT violation of a dual solution:
/// `max(0, 1 − y f)` at α = 0, `max(0, y f − 1)` at α = C, `|y f − 1|` otherwise.
pub fn kkt_violations(kernel: &Matrix, y: &[f64], alpha: &[f64], bias: f64, c: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|t| {
            let f: f64 = (0..n)
                .map(|s| alpha[s] * y[s] * kernel.get(t, s))
                .sum::<f64>()
                + bias;
            let yf = y[t] * f;
            if alpha[t] <= 0.0 {
                (1.0 - yf).max(0.0)
            } else if alpha[t] >= c {
                (yf - 1.0).max(0.0)
            } else {
                (yf - 1.0).abs()
            }
        })
        .collect()
}

/// Dual objective `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij`.
pub fn dual_objective(kernel: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel.get(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// One-vs-rest RBF SVM. Support vectors of all machines share one pool;
/// each machine keeps signed coefficients `α_i y_i` over the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSvm {
    n_classes: usize,
    gamma: f64,
    support_vectors: Matrix,
    coefficients: Matrix,
    biases: Vec<f64>,
}

impl GaussianSvm {
    pub(super) fn fit(
        params: &GaussianSvmParams,
        x: &Matrix,
        targets: &[usize],
        n_classes: usize,
    ) -> Self {
        let gamma = params.gamma.unwrap_or(1.0 / x.cols().max(1) as f64);
        let positives: Vec<usize> = match n_classes {
            1 => vec![],
            2 => vec![1],
            c => (0..c).collect(),
        };
        let n = x.rows();
        let kernel = if positives.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            rbf_kernel_matrix(x, gamma)
        };
        let max_iter = params.max_passes.saturating_mul(n.max(1));
        let mut alphas = Vec::with_capacity(positives.len());
        let mut biases = Vec::with_capacity(positives.len());
        for &pos in &positives {
            let y: Vec<f64> = targets
                .iter()
                .map(|&t| if t == pos { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_smo(&kernel, &y, params.c, params.tol, max_iter, false);
            if !sol.converged {
                warn!(
                    "gaussian_svm: class {pos} stopped after {} updates without meeting tol",
                    sol.iterations
                );
            }
            let signed: Vec<f64> = sol.alpha.iter().zip(&y).map(|(a, t)| a * t).collect();
            alphas.push(signed);
            biases.push(sol.bias);
        }
        let pool: Vec<usize> = (0..n)
            .filter(|&i| alphas.iter().any(|a| a[i] != 0.0))
            .collect();
        let support_vectors = x.select_rows(&pool);
        let mut coefficients = Matrix::zeros(alphas.len(), pool.len());
        for (m, a) in alphas.iter().enumerate() {
            for (p, &i) in pool.iter().enumerate() {
                coefficients.set(m, p, a[i]);
            }
        }
        GaussianSvm {
            n_classes,
            gamma,
            support_vectors,
            coefficients,
            biases,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn support_vector_count(&self) -> usize {
        self.support_vectors.rows()
    }

    /// Signed margins; for two classes the columns are `[-f, f]`.
    pub fn scores(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let machines = self.biases.len();
        let mut k = vec![0.0; self.support_vectors.rows()];
        for (i, r) in x.iter_rows().enumerate() {
            for (p, sv) in self.support_vectors.iter_rows().enumerate() {
                k[p] = rbf(sv, r, self.gamma);
            }
            let margins: Vec<f64> = (0..machines)
                .map(|m| {
                    self.coefficients
                        .row(m)
                        .iter()
                        .zip(&k)
                        .map(|(a, v)| a * v)
                        .sum::<f64>()
                        + self.biases[m]
                })
                .collect();
            let row = out.row_mut(i);
            match self.n_classes {
                1 => {}
                2 => {
                    row[0] = -margins[0];
                    row[1] = margins[0];
                }
                _ => row.copy_from_slice(&margins),
            }
        }
        out
    }
}
