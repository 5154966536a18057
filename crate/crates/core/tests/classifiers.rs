mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sensepipe_core::classifiers::{
    bootstrap_sample, fit, hinge_objective, pegasos_binary, ClassifierKind, ClassifierSpec,
    LinearSvmParams, ModelState, Node, TrainedClassifier, Tree,
};
use sensepipe_core::matrix::Matrix;
use sensepipe_core::synthetic::{
    gaussian_blobs, nearest_centroid_accuracy, noisy_binary, sense_blobs,
};
use support::{accuracy, to_signs};

#[test]
fn every_kind_separates_blobs() {
    let (x, y) = gaussian_blobs(500, 3, 10, 10.0, 11);
    assert!(nearest_centroid_accuracy(&x, &y) >= 0.99);
    for kind in ClassifierKind::ALL {
        let model = fit(&ClassifierSpec::default_for(kind, 5), &x, &y).unwrap();
        let acc = accuracy(&model, &x, &y);
        assert!(acc >= 0.95, "{kind}: {acc}");
    }
}

#[test]
fn mlp_on_small_blobs() {
    let (x, y) = gaussian_blobs(150, 3, 10, 10.0, 3);
    assert!(nearest_centroid_accuracy(&x, &y) >= 0.99);
    let model = fit(&ClassifierSpec::default_for(ClassifierKind::Mlp, 8), &x, &y).unwrap();
    assert!(accuracy(&model, &x, &y) >= 0.95);
    let scores = model.predict_scores(&x).unwrap();
    for row in scores.iter_rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn argmax_of_scores_matches_predict() {
    let (x, y) = gaussian_blobs(120, 3, 4, 3.0, 2);
    for kind in ClassifierKind::ALL {
        let model = fit(&ClassifierSpec::default_for(kind, 1), &x, &y).unwrap();
        let scores = model.predict_scores(&x).unwrap();
        let pred = model.predict(&x).unwrap();
        for (row, p) in scores.iter_rows().zip(&pred) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let first = row.iter().position(|&v| v == max).unwrap();
            assert_eq!(model.class_codes()[first], *p, "{kind}");
        }
    }
}

#[test]
fn gaussian_svm_solves_xor_like_the_dual_oracle() {
    support::check_xor_against_oracle();
}

#[test]
fn smo_terminates_at_a_kkt_point() {
    support::check_smo_fixtures();
}

#[test]
fn adaboost_training_error_obeys_the_product_bound() {
    support::check_adaboost_bound();
}

fn gini_of(rows: &[usize], y: &[u8]) -> f64 {
    let n = rows.len() as f64;
    let mut counts = std::collections::BTreeMap::new();
    for &r in rows {
        *counts.entry(y[r]).or_insert(0.0) += 1.0;
    }
    1.0 - counts
        .values()
        .map(|c: &f64| (c / n) * (c / n))
        .sum::<f64>()
}

/// Routes training rows through the tree and checks depth, leaf majorities
/// and impurity decrease from the routed samples alone.
fn check_tree(tree: &Tree, x: &Matrix, y: &[u8], rows: &[usize], max_depth: usize) {
    fn walk(
        tree: &Tree,
        id: usize,
        depth: usize,
        rows: Vec<usize>,
        x: &Matrix,
        y: &[u8],
        max_depth: usize,
    ) {
        assert!(depth <= max_depth);
        match &tree.nodes()[id] {
            Node::Leaf { distribution, .. } => {
                let mut counts = vec![0usize; distribution.len()];
                rows.iter().for_each(|&r| counts[y[r] as usize] += 1);
                let majority =
                    (0..counts.len()).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
                let label = (0..distribution.len()).fold(0, |b, k| {
                    if distribution[k] > distribution[b] {
                        k
                    } else {
                        b
                    }
                });
                assert_eq!(label, majority);
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| x.get(i, *feature) <= *threshold);
                assert!(!l.is_empty() && !r.is_empty());
                let parent = gini_of(&rows, y);
                let n = rows.len() as f64;
                let children =
                    (l.len() as f64 * gini_of(&l, y) + r.len() as f64 * gini_of(&r, y)) / n;
                assert!(children < parent, "split does not reduce impurity");
                walk(tree, *left, depth + 1, l, x, y, max_depth);
                walk(tree, *right, depth + 1, r, x, y, max_depth);
            }
        }
    }
    walk(tree, 0, 0, rows.to_vec(), x, y, max_depth);
}

#[test]
fn decision_tree_invariants() {
    let (nx, ny) = noisy_binary(300, 0.2, 8);
    let (bx, by) = gaussian_blobs(300, 3, 6, 2.0, 9);
    for (x, y) in [(nx, ny), (bx, by)] {
        let model = fit(
            &ClassifierSpec::default_for(ClassifierKind::DecisionTree, 0),
            &x,
            &y,
        )
        .unwrap();
        let ModelState::DecisionTree(t) = model.state() else {
            panic!()
        };
        assert!(t.tree().depth() <= 5);
        check_tree(t.tree(), &x, &y, &(0..x.rows()).collect::<Vec<_>>(), 5);
    }
}

#[test]
fn decision_tree_single_split_on_sign() {
    let xs: Vec<f64> = (0..20).map(|i| -1.0 + i as f64 * 0.1 + 0.05).collect();
    let y: Vec<u8> = xs.iter().map(|&v| u8::from(v >= 0.0)).collect();
    let x = Matrix::from_vec(20, 1, xs);
    let model = fit(
        &ClassifierSpec::default_for(ClassifierKind::DecisionTree, 0),
        &x,
        &y,
    )
    .unwrap();
    assert_eq!(model.predict(&x).unwrap(), y);
    let ModelState::DecisionTree(t) = model.state() else {
        panic!()
    };
    assert_eq!(t.tree().split_count(), 1);
}

#[test]
fn random_forest_is_reproducible_and_beats_one_tree() {
    let (x, y) = gaussian_blobs(500, 3, 10, 10.0, 12);
    let spec = ClassifierSpec::default_for(ClassifierKind::RandomForest, 77);
    let a = fit(&spec, &x, &y).unwrap();
    let b = fit(&spec, &x, &y).unwrap();
    assert_eq!(a.to_json_string().unwrap(), b.to_json_string().unwrap());
    let (ModelState::RandomForest(fa), ModelState::RandomForest(fb)) = (a.state(), b.state())
    else {
        panic!()
    };
    assert_eq!(fa.tree_seeds().len(), 10);
    for (sa, sb) in fa.tree_seeds().iter().zip(fb.tree_seeds()) {
        assert_eq!(
            bootstrap_sample(*sa, x.rows()),
            bootstrap_sample(*sb, x.rows())
        );
    }
    for (tree, &seed) in fa.trees().iter().zip(fa.tree_seeds()) {
        let rows = bootstrap_sample(seed, x.rows());
        check_tree(tree, &x, &y, &rows, 5);
    }
    let c = fit(&spec.with_seed(78), &x, &y).unwrap();
    assert_ne!(a.to_json_string().unwrap(), c.to_json_string().unwrap());

    let tree = fit(
        &ClassifierSpec::default_for(ClassifierKind::DecisionTree, 0),
        &x,
        &y,
    )
    .unwrap();
    assert!(accuracy(&a, &x, &y) >= accuracy(&tree, &x, &y));
}

#[test]
fn forest_scores_are_vote_fractions() {
    let d = sense_blobs(20, 8, 8.0, 1);
    let model = fit(
        &ClassifierSpec::default_for(ClassifierKind::RandomForest, 0),
        &d.features,
        &d.label_codes(),
    )
    .unwrap();
    let s = model.predict_scores(&d.features).unwrap();
    assert_eq!(s.cols(), 7);
    for row in s.iter_rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row
            .iter()
            .all(|v| (v * 10.0 - (v * 10.0).round()).abs() < 1e-9));
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let worst = support::mlp_gradient_error(5);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn pegasos_objective_mostly_decreases() {
    let (nx, ny) = noisy_binary(300, 0.1, 2);
    let (bx, by) = gaussian_blobs(300, 2, 10, 4.0, 3);
    for (x, y) in [(nx, ny), (bx, by)] {
        let signs = to_signs(&y);
        let fit = pegasos_binary(&x, &signs, 1e-4, 100, &mut ChaCha8Rng::seed_from_u64(1));
        let increases = fit.objectives.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(
            increases as f64 <= 0.05 * (fit.objectives.len() - 1) as f64,
            "{increases} increases"
        );
    }
}

#[test]
fn pegasos_reaches_the_grid_optimum_on_a_toy_problem() {
    let (x, y) = noisy_binary(40, 0.1, 17);
    let signs = to_signs(&y);
    let lambda = 0.05;
    let fit = pegasos_binary(&x, &signs, lambda, 100, &mut ChaCha8Rng::seed_from_u64(3));
    let got = hinge_objective(&fit.weights, fit.bias, &x, &signs, lambda);
    let mut best = f64::INFINITY;
    let steps = 120;
    let range = 6.0;
    for i in 0..=steps {
        for j in 0..=steps {
            for k in 0..=40 {
                let w = [
                    -range + 2.0 * range * i as f64 / steps as f64,
                    -range + 2.0 * range * j as f64 / steps as f64,
                ];
                let b = -2.0 + 4.0 * k as f64 / 40.0;
                best = best.min(hinge_objective(&w, b, &x, &signs, lambda));
            }
        }
    }
    assert!(got <= best * 1.05, "pegasos {got} vs grid {best}");
}

#[test]
fn default_linear_svm_params() {
    assert_eq!(
        LinearSvmParams::default(),
        LinearSvmParams {
            lambda: 1e-4,
            epochs: 100
        }
    );
}

#[test]
fn json_round_trip_preserves_predictions() {
    let (x, y) = gaussian_blobs(90, 3, 4, 4.0, 5);
    for kind in ClassifierKind::ALL {
        let model = fit(&ClassifierSpec::default_for(kind, 2), &x, &y).unwrap();
        let text = model.to_json_string().unwrap();
        let back = TrainedClassifier::read_json(text.as_bytes()).unwrap();
        assert_eq!(back, model, "{kind}");
        assert_eq!(
            back.predict_scores(&x).unwrap(),
            model.predict_scores(&x).unwrap()
        );
        assert_eq!(back.to_json_string().unwrap(), text);
    }
}

#[test]
fn malformed_model_json_reports_position() {
    let err =
        TrainedClassifier::read_json("{\n  \"format_version\": 1,\n  \"kind\": knn\n}".as_bytes())
            .unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = TrainedClassifier::read_json(r#"{"format_version": 9, "kind": "knn", "hyperparams": {}, "class_codes": [0], "state": {"dim": 1, "rng_seed": 0, "model": {}}}"#.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("format_version"), "{err}");
}
