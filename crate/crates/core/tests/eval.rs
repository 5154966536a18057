use std::collections::BTreeMap;
use std::fs;

use proptest::prelude::*;
use sensepipe_core::classifiers::{
    ClassifierKind, ClassifierSpec, GaussianSvmParams, Hyperparams, KnnParams,
};
use sensepipe_core::eval::{compare_segmentation, DeltaRow};
use sensepipe_core::eval::{
    emit_report, evaluate, holdout_split, learning_curve, nested_draws, one_vs_all_accuracy,
    EvalError, EvalOptions, EvaluationReport, LearningCurve, ReportFormat, ReportItem,
};
use sensepipe_core::lexicon::{LabeledDataset, SenseType};
use sensepipe_core::matrix::Matrix;
use sensepipe_core::synthetic::{nearest_centroid_accuracy, sense_blobs};

fn gaussian() -> ClassifierSpec {
    ClassifierSpec::default_for(ClassifierKind::GaussianSvm, 0)
}

#[test]
fn separable_senses_score_perfectly_one_vs_all() {
    let data = sense_blobs(30, 10, 12.0, 3);
    assert_eq!(
        nearest_centroid_accuracy(&data.features, &data.label_codes()),
        1.0
    );
    let cells = one_vs_all_accuracy(&gaussian(), &data, 5).unwrap();
    assert_eq!(cells.len(), 7);
    for (sense, o) in &cells {
        assert_eq!(o.accuracy.accuracy, 1.0, "{sense}");
        assert_eq!(o.accuracy.total, data.len());
    }
}

#[test]
fn constant_features_predict_the_majority_side() {
    let counts = [5usize, 9, 3, 7, 4, 6, 8];
    let labels: Vec<SenseType> = SenseType::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&s, c)| std::iter::repeat_n(s, c))
        .collect();
    let n = labels.len();
    let data = LabeledDataset {
        features: Matrix::from_vec(n, 3, vec![0.25; n * 3]),
        words: (0..n).map(|i| format!("w{i}")).collect(),
        labels,
        coverage: 1.0,
    };
    for kind in [ClassifierKind::DecisionTree, ClassifierKind::AdaBoost] {
        let cells = one_vs_all_accuracy(&ClassifierSpec::default_for(kind, 0), &data, 1).unwrap();
        for (sense, c) in SenseType::ALL.iter().zip(counts) {
            assert_eq!(
                cells[sense].accuracy.correct,
                c.max(n - c),
                "{kind} {sense}"
            );
        }
    }
}

/// A wide kernel, so clusters missing from a small negative draw still fall
/// on the negative side.
fn wide_gaussian() -> ClassifierSpec {
    ClassifierSpec::new(
        Hyperparams::GaussianSvm(GaussianSvmParams {
            gamma: Some(0.005),
            ..Default::default()
        }),
        0,
    )
}

#[test]
fn learning_curve_shape_nesting_and_monotone_mean() {
    let data = sense_blobs(40, 10, 12.0, 8);
    let curve = learning_curve(&wide_gaussian(), &data, &[10, 20], 0.0, 4).unwrap();
    assert_eq!(curve.accuracy.len(), 2);
    assert!(curve.accuracy.iter().all(|r| r.len() == 7));
    assert!(
        curve.accuracy.iter().flatten().all(|&a| a == 1.0),
        "{:?}",
        curve.accuracy
    );
    assert!(curve.mean_accuracy(1) >= curve.mean_accuracy(0));

    let draws = nested_draws(&data, &[10, 20], 4).unwrap();
    assert_eq!(draws[0].len(), 70);
    assert_eq!(draws[1].len(), 140);
    assert!(draws[0].iter().all(|i| draws[1].contains(i)));
}

#[test]
fn learning_curve_on_noisy_blobs_does_not_degrade() {
    let data = sense_blobs(60, 10, 3.0, 2);
    let curve = learning_curve(&gaussian(), &data, &[5, 50], 0.0, 9).unwrap();
    assert!(
        curve.mean_accuracy(1) >= curve.mean_accuracy(0),
        "{:?}",
        curve.accuracy
    );
}

#[test]
fn infeasible_size_names_the_limiting_sense() {
    let mut data = sense_blobs(20, 8, 10.0, 1);
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] != SenseType::PartWhole || i % 2 == 0)
        .collect();
    data = data.subset(&keep);
    let available = data
        .labels
        .iter()
        .filter(|&&l| l == SenseType::PartWhole)
        .count();
    match learning_curve(&gaussian(), &data, &[5, 15], 0.0, 0) {
        Err(EvalError::InfeasibleSize {
            size: 15,
            sense: SenseType::PartWhole,
            available: a,
        }) => {
            assert_eq!(a, available)
        }
        other => panic!("{:?}", other.map(|c| c.sizes)),
    }
}

#[test]
fn evaluation_is_deterministic() {
    let data = sense_blobs(15, 8, 4.0, 6);
    let specs: Vec<_> = ClassifierKind::ALL
        .iter()
        .map(|&k| ClassifierSpec::default_for(k, 3))
        .collect();
    let options = EvalOptions {
        holdout_fraction: 0.25,
        ..Default::default()
    };
    let a = evaluate(&specs, &data, &options, 11).unwrap();
    let b = evaluate(&specs, &data, &options, 11).unwrap();
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
    for (x, y) in a.models.iter().zip(&b.models) {
        assert_eq!(x.to_json_string().unwrap(), y.to_json_string().unwrap());
    }
}

#[test]
fn duplicate_kinds_are_rejected() {
    let data = sense_blobs(5, 8, 10.0, 0);
    let specs = [gaussian(), gaussian()];
    assert!(matches!(
        evaluate(&specs, &data, &EvalOptions::default(), 0),
        Err(EvalError::DuplicateKind(_))
    ));
}

#[test]
fn missing_sense_is_an_error() {
    let data = sense_blobs(5, 8, 10.0, 0);
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] != SenseType::GripGrasp)
        .collect();
    let r = one_vs_all_accuracy(&gaussian(), &data.subset(&keep), 0);
    assert!(r.is_err());
}

#[test]
fn reports_round_trip_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = sense_blobs(10, 8, 8.0, 5);
    let knn = ClassifierSpec::new(Hyperparams::Knn(KnnParams { k: 3 }), 0);
    let run = evaluate(&[knn, gaussian()], &data, &EvalOptions::default(), 2).unwrap();
    let path = dir.path().join("r.json");
    emit_report(
        ReportItem::Evaluation(&run.report),
        ReportFormat::Json,
        &path,
    )
    .unwrap();
    let back: EvaluationReport = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, run.report);

    let curve = learning_curve(&gaussian(), &data, &[3, 6], 0.0, 1).unwrap();
    emit_report(ReportItem::Curve(&curve), ReportFormat::Json, &path).unwrap();
    let back: LearningCurve = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, curve);

    let before: BTreeMap<_, _> = run
        .report
        .overall
        .iter()
        .map(|(k, a)| (*k, a.accuracy * 0.5))
        .collect();
    let after: BTreeMap<_, _> = run
        .report
        .overall
        .iter()
        .map(|(k, a)| (*k, a.accuracy))
        .collect();
    let rows = compare_segmentation(&before, &after).unwrap();
    emit_report(ReportItem::Delta(&rows), ReportFormat::Json, &path).unwrap();
    let back: Vec<DeltaRow> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn csv_and_svg_reports_have_expected_shape() {
    let data = sense_blobs(10, 8, 8.0, 5);
    let run = evaluate(&[gaussian()], &data, &EvalOptions::default(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    emit_report(ReportItem::Evaluation(&run.report), ReportFormat::Csv, &csv).unwrap();
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0].split(',').count(), 9);
    assert!(lines[1].starts_with("gaussian_svm,100.00,"));
    let svg = dir.path().join("r.svg");
    emit_report(ReportItem::Evaluation(&run.report), ReportFormat::Svg, &svg).unwrap();
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("<rect").count(), 1 + 7 + 1);
}

#[test]
fn empty_results_give_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    emit_report(ReportItem::Delta(&[]), ReportFormat::Csv, &path).unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        "kind,before,after,delta\n"
    );
}

#[test]
fn unwritable_path_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = emit_report(
        ReportItem::Delta(&[]),
        ReportFormat::Csv,
        &dir.path().join("no/such/dir.csv"),
    );
    assert!(matches!(r, Err(EvalError::Io(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn holdout_is_a_stratified_partition(per_class in 2usize..12, fraction in 0.05f64..0.9, seed in any::<u64>()) {
        let data = sense_blobs(per_class, 7, 1.0, seed);
        let (train, val) = holdout_split(&data, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + val.len(), data.len());
        let mut words: Vec<&String> = train.words.iter().chain(&val.words).collect();
        words.sort();
        words.dedup();
        prop_assert_eq!(words.len(), data.len());
        let expected = ((per_class as f64 * fraction).round() as usize).min(per_class - 1);
        for s in SenseType::ALL {
            prop_assert_eq!(val.labels.iter().filter(|&&l| l == s).count(), expected);
        }
    }
}
