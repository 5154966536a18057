//! Oracles shared by the integration suites and the acceptance runner.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensepipe_core::classifiers::{
    dual_objective, fit, kkt_violations, rbf_kernel_matrix, solve_smo, ClassifierKind,
    ClassifierSpec, GaussianSvmParams, Hyperparams, Mlp, ModelState, TrainedClassifier,
};
use sensepipe_core::embedding::{sgns_gradients, sgns_loss};
use sensepipe_core::matrix::Matrix;
use sensepipe_core::synthetic::{gaussian_blobs, noisy_binary, xor_fixture};

pub const TOY: [&str; 5] = ["walk", "walked", "walking", "talk", "talked"];

pub fn accuracy(model: &TrainedClassifier, x: &Matrix, y: &[u8]) -> f64 {
    let p = model.predict(x).unwrap();
    p.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

pub fn to_signs(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect()
}

// ---- morphology ----

pub fn description_length(counts: &HashMap<String, u64>, alphabet: usize) -> f64 {
    let n: u64 = counts.values().sum();
    let mut corpus = 0.0;
    let mut codebook = 0.0;
    for (m, &c) in counts {
        if c == 0 {
            continue;
        }
        corpus -= c as f64 * (c as f64 / n as f64).ln();
        codebook += (m.chars().count() + 1) as f64 * ((alphabet + 1) as f64).ln();
        let gamma_bits = 2.0 * (c as f64).log2().floor() + 1.0;
        codebook += gamma_bits * std::f64::consts::LN_2;
    }
    corpus + codebook
}

pub fn all_splits(word: &str) -> Vec<Vec<String>> {
    let chars: Vec<char> = word.chars().collect();
    let gaps = chars.len() - 1;
    (0u32..1 << gaps)
        .map(|mask| {
            let mut parts = vec![String::new()];
            for (i, c) in chars.iter().enumerate() {
                parts.last_mut().unwrap().push(*c);
                if i < gaps && mask & (1 << i) != 0 {
                    parts.push(String::new());
                }
            }
            parts
        })
        .collect()
}

struct Search {
    options: Vec<Vec<Vec<String>>>,
    counts: HashMap<String, u64>,
    alphabet: usize,
    chosen: Vec<usize>,
    best: (f64, Vec<usize>),
}

impl Search {
    fn run(&mut self, word: usize) {
        if word == self.options.len() {
            let cost = description_length(&self.counts, self.alphabet);
            if cost < self.best.0 {
                self.best = (cost, self.chosen.clone());
            }
            return;
        }
        for k in 0..self.options[word].len() {
            for m in &self.options[word][k] {
                *self.counts.entry(m.clone()).or_default() += 1;
            }
            self.chosen.push(k);
            self.run(word + 1);
            self.chosen.pop();
            for m in &self.options[word][k] {
                *self.counts.get_mut(m).unwrap() -= 1;
            }
        }
    }
}

/// Minimum description length over every joint segmentation of `words`,
/// each word counted once.
pub fn exhaustive_optimum(words: &[&str]) -> (f64, Vec<Vec<String>>) {
    let mut alphabet: Vec<char> = words.iter().flat_map(|w| w.chars()).collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    let mut search = Search {
        options: words.iter().map(|w| all_splits(w)).collect(),
        counts: HashMap::new(),
        alphabet: alphabet.len(),
        chosen: Vec::new(),
        best: (f64::INFINITY, Vec::new()),
    };
    search.run(0);
    let best = search
        .best
        .1
        .iter()
        .enumerate()
        .map(|(w, &k)| search.options[w][k].clone())
        .collect();
    (search.best.0, best)
}

// ---- gradients ----

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

/// Central differences of the loss w.r.t. one coordinate of one of the three vectors.
fn sgns_numeric_gradient(
    v: &[f64],
    u_o: &[f64],
    u_n: &[&[f64]],
    which: usize,
    slot: usize,
    i: usize,
) -> f64 {
    let h = 1e-5;
    let eval = |delta: f64| {
        let mut v = v.to_vec();
        let mut u_o = u_o.to_vec();
        let mut negs: Vec<Vec<f64>> = u_n.iter().map(|u| u.to_vec()).collect();
        match which {
            0 => v[i] += delta,
            1 => u_o[i] += delta,
            _ => negs[slot][i] += delta,
        }
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        sgns_loss(&v, &u_o, &refs)
    };
    (eval(h) - eval(-h)) / (2.0 * h)
}

/// Worst relative error of the SGNS gradients on a frozen 3-word vocabulary:
/// center, context and one noise word drawn twice.
pub fn sgns_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 6;
    let mut vec = || {
        (0..dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let (v, u_o, u_n) = (vec(), vec(), vec());
    let u_m = vec();
    let negs: Vec<&[f64]> = vec![&u_n, &u_m, &u_n];
    let g = sgns_gradients(&v, &u_o, &negs);
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        worst = worst.max(relative_error(
            g.center[i],
            sgns_numeric_gradient(&v, &u_o, &negs, 0, 0, i),
        ));
        worst = worst.max(relative_error(
            g.context[i],
            sgns_numeric_gradient(&v, &u_o, &negs, 1, 0, i),
        ));
        for slot in 0..negs.len() {
            // repeated draws share a row; the loss sees the sum of both terms
            let numeric = sgns_numeric_gradient(&v, &u_o, &negs, 2, slot, i);
            worst = worst.max(relative_error(g.negatives[slot][i], numeric));
        }
    }
    worst
}

/// Worst relative error of the MLP backward pass on a 4-6-5-3 network.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(&[4, 6, 5, 3], &mut rng);
    for p in net.params_mut() {
        *p += rng.random_range(-0.05..0.05);
    }
    let x = Matrix::from_vec(5, 4, (0..20).map(|_| rng.random_range(-2.0..2.0)).collect());
    let targets = [0, 2, 1, 1, 0];
    let (_, grad) = net.loss_and_gradients(&x, &targets);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, &analytic) in grad.iter().enumerate() {
        let orig = net.params()[k];
        net.params_mut()[k] = orig + h;
        let (up, _) = net.loss_and_gradients(&x, &targets);
        net.params_mut()[k] = orig - h;
        let (down, _) = net.loss_and_gradients(&x, &targets);
        net.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs());
        let rel = if scale < 1e-10 {
            0.0
        } else {
            (analytic - numeric).abs() / scale
        };
        worst = worst.max(rel);
    }
    worst
}

// ---- kernel machines ----

/// Maximizes the 4-variable XOR dual over a grid satisfying Σ y α = 0.
pub fn xor_dual_oracle(k: &Matrix, y: &[f64], c: f64, step: f64) -> Vec<f64> {
    let n_steps = (c / step).round() as usize;
    let mut best = (f64::NEG_INFINITY, vec![0.0; 4]);
    for i in 0..=n_steps {
        for j in 0..=n_steps {
            for l in 0..=n_steps {
                let a = [i as f64 * step, j as f64 * step, l as f64 * step];
                // y = (+, +, −, −): α4 = α1 + α2 − α3.
                let a4 = a[0] + a[1] - a[2];
                if !(0.0..=c).contains(&a4) {
                    continue;
                }
                let alpha = [a[0], a[1], a[2], a4];
                let v = dual_objective(k, y, &alpha);
                if v > best.0 {
                    best = (v, alpha.to_vec());
                }
            }
        }
    }
    best.1
}

/// Fits gaussian_svm (C 10, γ 1) on XOR and checks it against the grid oracle.
pub fn check_xor_against_oracle() {
    let (x, y) = xor_fixture();
    let signs = to_signs(&y);
    let k = rbf_kernel_matrix(&x, 1.0);
    let alpha = xor_dual_oracle(&k, &signs, 10.0, 0.05);
    let free: Vec<usize> = (0..4)
        .filter(|&i| alpha[i] > 1e-9 && alpha[i] < 10.0 - 1e-9)
        .collect();
    assert!(!free.is_empty(), "oracle has no free support vector");
    let b = free
        .iter()
        .map(|&t| {
            signs[t]
                - (0..4)
                    .map(|s| alpha[s] * signs[s] * k.get(t, s))
                    .sum::<f64>()
        })
        .sum::<f64>()
        / free.len() as f64;
    let oracle_sign = |t: usize| {
        ((0..4)
            .map(|s| alpha[s] * signs[s] * k.get(t, s))
            .sum::<f64>()
            + b)
            .signum()
    };

    let spec = ClassifierSpec::new(
        Hyperparams::GaussianSvm(GaussianSvmParams {
            c: 10.0,
            gamma: Some(1.0),
            ..Default::default()
        }),
        0,
    );
    let model = fit(&spec, &x, &y).unwrap();
    assert_eq!(
        model.predict(&x).unwrap(),
        y,
        "xor training accuracy below 100%"
    );
    let margins = model.predict_scores(&x).unwrap();
    for (t, &sign) in signs.iter().enumerate() {
        assert_eq!(margins.get(t, 1).signum(), oracle_sign(t), "xor point {t}");
        assert_eq!(oracle_sign(t), sign, "oracle misclassifies xor point {t}");
    }
}

/// Name, features, labels, C and γ.
pub fn binary_fixtures() -> Vec<(&'static str, Matrix, Vec<u8>, f64, f64)> {
    let (xor_x, xor_y) = xor_fixture();
    let (nx, ny) = noisy_binary(200, 0.1, 4);
    let (bx, by) = gaussian_blobs(150, 2, 5, 3.0, 6);
    vec![
        ("xor", xor_x, xor_y, 10.0, 1.0),
        ("noisy", nx.clone(), ny.clone(), 1.0, 1.0),
        ("noisy_hard_margin", nx, ny, 100.0, 5.0),
        ("blobs", bx, by, 1.0, 0.2),
    ]
}

/// Runs SMO on every binary fixture and checks optimality; returns the worst
/// KKT violation seen.
pub fn check_smo_fixtures() -> f64 {
    let mut overall: f64 = 0.0;
    for (name, x, y, c, gamma) in binary_fixtures() {
        let signs = to_signs(&y);
        let k = rbf_kernel_matrix(&x, gamma);
        let sol = solve_smo(&k, &signs, c, 1e-3, 10_000 * x.rows(), true);
        assert!(sol.converged, "{name}: not converged");
        assert!(
            sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)),
            "{name}: alpha outside [0, C]"
        );
        let eq: f64 = sol.alpha.iter().zip(&signs).map(|(a, s)| a * s).sum();
        assert!(eq.abs() < 1e-9 * c * x.rows() as f64, "{name}: Σyα = {eq}");
        let worst = kkt_violations(&k, &signs, &sol.alpha, sol.bias, c)
            .into_iter()
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "{name}: KKT violation {worst}");
        for w in sol.dual_history.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-12,
                "{name}: dual decreased {} -> {}",
                w[0],
                w[1]
            );
        }
        let direct = dual_objective(&k, &signs, &sol.alpha);
        assert!(
            (direct - sol.dual_history.last().unwrap()).abs() < 1e-8 * direct.abs().max(1.0),
            "{name}"
        );
        overall = overall.max(worst);
    }
    overall
}

/// Fits default AdaBoost on noisy binary data; returns training error and
/// the product bound after asserting it holds.
pub fn check_adaboost_bound() -> (f64, f64) {
    let (x, y) = noisy_binary(300, 0.1, 21);
    let model = fit(
        &ClassifierSpec::default_for(ClassifierKind::AdaBoost, 0),
        &x,
        &y,
    )
    .unwrap();
    let ModelState::AdaBoost(boost) = model.state() else {
        panic!("not an AdaBoost model")
    };
    let errors = boost.round_errors();
    assert!(!errors.is_empty(), "no accepted rounds");
    assert!(
        errors.iter().all(|&e| e < 0.5),
        "round error at or above 0.5: {errors:?}"
    );
    let bound: f64 = errors
        .iter()
        .map(|&e| 2.0 * (e * (1.0 - e)).sqrt())
        .product();
    let train_err = 1.0 - accuracy(&model, &x, &y);
    assert!(train_err <= bound, "error {train_err} > bound {bound}");
    (train_err, bound)
}
