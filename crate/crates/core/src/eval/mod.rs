//! Evaluation protocol: one-vs-all per-sense accuracy, overall multiclass
//! accuracy, before/after comparison and learning curves.

mod report;
mod svg;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{fit, ClassifierError, ClassifierKind, ClassifierSpec, TrainedClassifier};
use crate::lexicon::{
    balanced_sample, shuffled_class_indices, LabeledDataset, LexiconError, SenseType,
};
use crate::seed::derive_seed;

pub use report::{
    curve_csv, delta_csv, emit_report, evaluation_csv, percent, render, ReportFormat, ReportItem,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("feature dimension mismatch: training has {train}, validation has {validation}")]
    DimensionMismatch { train: usize, validation: usize },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("classifier kinds differ between the two result sets: {0}")]
    KindMismatch(String),
    #[error("classifier kind {0} listed more than once")]
    DuplicateKind(ClassifierKind),
    #[error("invalid sizes: {0}")]
    InvalidSizes(String),
    #[error("size {size} is infeasible: class {sense} has only {available} training samples")]
    InfeasibleSize {
        size: usize,
        sense: SenseType,
        available: usize,
    },
    #[error("holdout fraction must lie in [0, 1), got {0}")]
    InvalidHoldout(f64),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// An exact correct/total count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    pub fn new(correct: usize, total: usize) -> Self {
        assert!(total > 0, "accuracy over an empty set");
        assert!(correct <= total);
        Accuracy {
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        }
    }

    pub fn count<T: PartialEq>(predicted: &[T], truth: &[T]) -> Self {
        assert_eq!(predicted.len(), truth.len());
        Accuracy::new(
            predicted.iter().zip(truth).filter(|(p, t)| p == t).count(),
            truth.len(),
        )
    }
}

/// Result of one binary sense-vs-rest task.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryOutcome {
    pub accuracy: Accuracy,
    pub train_positives: usize,
    pub train_negatives: usize,
    /// Predicted membership for each validation row.
    pub predictions: Vec<bool>,
    pub truth: Vec<bool>,
}

fn cell_spec(spec: &ClassifierSpec, seed: u64, label: &str) -> ClassifierSpec {
    spec.with_seed(derive_seed(seed, &format!("{label}/{}", spec.rng_seed)))
}

fn require_all_senses(train: &LabeledDataset) -> Result<(), EvalError> {
    let missing = train.missing_classes(&SenseType::ALL);
    if missing.is_empty() {
        Ok(())
    } else {
        Err(LexiconError::MissingClasses(missing).into())
    }
}

fn check_dims(train: &LabeledDataset, validation: &LabeledDataset) -> Result<(), EvalError> {
    if validation.is_empty() {
        return Err(EvalError::EmptyValidation);
    }
    if train.dim() != validation.dim() {
        return Err(EvalError::DimensionMismatch {
            train: train.dim(),
            validation: validation.dim(),
        });
    }
    Ok(())
}

fn binary_task(
    spec: &ClassifierSpec,
    sense: SenseType,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    seed: u64,
) -> Result<BinaryOutcome, EvalError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let label = format!("ovr/{}/{}", spec.kind(), sense.name());
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) =
        (0..train.len()).partition(|&i| train.labels[i] == sense);
    let mut rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{label}/balance")));
    let m = pos.len().min(neg.len());
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut rows: Vec<usize> = pos[..m].iter().chain(&neg[..m]).copied().collect();
    rows.sort_unstable();
    let x = train.features.select_rows(&rows);
    let y: Vec<u8> = rows
        .iter()
        .map(|&i| u8::from(train.labels[i] == sense))
        .collect();
    let model = fit(&cell_spec(spec, seed, &label), &x, &y)?;
    let predictions: Vec<bool> = model
        .predict(&validation.features)?
        .into_iter()
        .map(|c| c == 1)
        .collect();
    let truth: Vec<bool> = validation.labels.iter().map(|&l| l == sense).collect();
    Ok(BinaryOutcome {
        accuracy: Accuracy::count(&predictions, &truth),
        train_positives: m,
        train_negatives: m,
        predictions,
        truth,
    })
}

/// One-vs-all protocol with training on `train` and scoring on `validation`.
/// Each sense's binary task undersamples the larger side to the smaller.
pub fn one_vs_all_split(
    spec: &ClassifierSpec,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    seed: u64,
) -> Result<BTreeMap<SenseType, BinaryOutcome>, EvalError> {
    require_all_senses(train)?;
    check_dims(train, validation)?;
    let cells: Vec<_> = SenseType::ALL
        .par_iter()
        .map(|&s| binary_task(spec, s, train, validation, seed).map(|o| (s, o)))
        .collect();
    cells.into_iter().collect()
}

/// One-vs-all protocol scored on the same dataset it trains from.
pub fn one_vs_all_accuracy(
    spec: &ClassifierSpec,
    dataset: &LabeledDataset,
    seed: u64,
) -> Result<BTreeMap<SenseType, BinaryOutcome>, EvalError> {
    one_vs_all_split(spec, dataset, dataset, seed)
}

fn fit_multiclass(
    spec: &ClassifierSpec,
    train: &LabeledDataset,
    seed: u64,
) -> Result<TrainedClassifier, EvalError> {
    Ok(fit(
        &cell_spec(spec, seed, &format!("overall/{}", spec.kind())),
        &train.features,
        &train.label_codes(),
    )?)
}

fn score(model: &TrainedClassifier, validation: &LabeledDataset) -> Result<Accuracy, EvalError> {
    Ok(Accuracy::count(
        &model.predict(&validation.features)?,
        &validation.label_codes(),
    ))
}

/// Fits a multiclass model on `train` and returns its accuracy on `validation`.
pub fn overall_accuracy(
    spec: &ClassifierSpec,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    seed: u64,
) -> Result<Accuracy, EvalError> {
    check_dims(train, validation)?;
    score(&fit_multiclass(spec, train, seed)?, validation)
}

/// Stratified split: each class sends `round(fraction · n_c)` rows to
/// validation, always leaving at least one for training. A zero fraction
/// returns the dataset as both halves.
pub fn holdout_split(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), EvalError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(EvalError::InvalidHoldout(fraction));
    }
    if fraction == 0.0 {
        return Ok((dataset.clone(), dataset.clone()));
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for idx in shuffled_class_indices(dataset, derive_seed(seed, "holdout")).values() {
        let k = ((idx.len() as f64 * fraction).round() as usize).min(idx.len().saturating_sub(1));
        validation.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&validation)))
}

fn balanced_training_set(train: &LabeledDataset, seed: u64) -> Result<LabeledDataset, EvalError> {
    require_all_senses(train)?;
    Ok(balanced_sample(
        train,
        &SenseType::ALL,
        derive_seed(seed, "balance"),
    )?)
}

/// The multiclass model `evaluate` would fit for `spec` with the same
/// dataset, holdout fraction and seed.
pub fn train_model(
    spec: &ClassifierSpec,
    dataset: &LabeledDataset,
    holdout_fraction: f64,
    seed: u64,
) -> Result<TrainedClassifier, EvalError> {
    let (train, _) = holdout_split(dataset, holdout_fraction, seed)?;
    fit_multiclass(spec, &balanced_training_set(&train, seed)?, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub segmented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub condition: Condition,
    pub rng_seed: u64,
    pub holdout_fraction: f64,
    pub coverage: f64,
    /// Rows in the balanced multiclass training set.
    pub training_size: usize,
    /// Validation rows per sense.
    pub sample_counts: BTreeMap<SenseType, usize>,
    pub overall: BTreeMap<ClassifierKind, Accuracy>,
    pub per_sense: BTreeMap<ClassifierKind, BTreeMap<SenseType, Accuracy>>,
}

pub struct EvaluationRun {
    pub report: EvaluationReport,
    /// Multiclass models fit on the balanced training set, in spec order.
    pub models: Vec<TrainedClassifier>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub holdout_fraction: f64,
    pub segmented: bool,
    pub per_sense: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            holdout_fraction: 0.0,
            segmented: false,
            per_sense: true,
        }
    }
}

/// Full protocol for a list of specs: optional stratified holdout, balanced
/// multiclass training, overall accuracy and (optionally) the per-sense
/// one-vs-all table.
pub fn evaluate(
    specs: &[ClassifierSpec],
    dataset: &LabeledDataset,
    options: &EvalOptions,
    seed: u64,
) -> Result<EvaluationRun, EvalError> {
    let mut seen = Vec::new();
    for s in specs {
        if seen.contains(&s.kind()) {
            return Err(EvalError::DuplicateKind(s.kind()));
        }
        seen.push(s.kind());
    }
    let (train, validation) = holdout_split(dataset, options.holdout_fraction, seed)?;
    check_dims(&train, &validation)?;
    let balanced = balanced_training_set(&train, seed)?;
    let mut report = EvaluationReport {
        condition: Condition {
            segmented: options.segmented,
        },
        rng_seed: seed,
        holdout_fraction: options.holdout_fraction,
        coverage: dataset.coverage,
        training_size: balanced.len(),
        sample_counts: validation.class_counts(),
        overall: BTreeMap::new(),
        per_sense: BTreeMap::new(),
    };
    let mut models = Vec::with_capacity(specs.len());
    for spec in specs {
        log::info!("evaluating {}", spec.kind());
        let model = fit_multiclass(spec, &balanced, seed)?;
        report
            .overall
            .insert(spec.kind(), score(&model, &validation)?);
        models.push(model);
        if options.per_sense {
            let cells = one_vs_all_split(spec, &train, &validation, seed)?;
            report.per_sense.insert(
                spec.kind(),
                cells.into_iter().map(|(s, o)| (s, o.accuracy)).collect(),
            );
        }
    }
    Ok(EvaluationRun { report, models })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub kind: ClassifierKind,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

/// Before/after accuracy table in canonical kind order.
pub fn compare_segmentation(
    before: &BTreeMap<ClassifierKind, f64>,
    after: &BTreeMap<ClassifierKind, f64>,
) -> Result<Vec<DeltaRow>, EvalError> {
    let kb: Vec<_> = before.keys().collect();
    let ka: Vec<_> = after.keys().collect();
    if kb != ka {
        let only = |a: &BTreeMap<ClassifierKind, f64>, b: &BTreeMap<ClassifierKind, f64>| {
            a.keys()
                .filter(|k| !b.contains_key(k))
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(", ")
        };
        return Err(EvalError::KindMismatch(format!(
            "only before: [{}], only after: [{}]",
            only(before, after),
            only(after, before)
        )));
    }
    Ok(before
        .iter()
        .map(|(&kind, &b)| {
            let a = after[&kind];
            DeltaRow {
                kind,
                before: b,
                after: a,
                delta: a - b,
            }
        })
        .collect())
}

/// Per-sense accuracy as training draws grow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub kind: ClassifierKind,
    pub rng_seed: u64,
    /// Training samples drawn per class.
    pub sizes: Vec<usize>,
    pub senses: Vec<SenseType>,
    /// `accuracy[i][j]`: size `sizes[i]`, sense `senses[j]`.
    pub accuracy: Vec<Vec<f64>>,
}

impl LearningCurve {
    pub fn mean_accuracy(&self, size_index: usize) -> f64 {
        let row = &self.accuracy[size_index];
        row.iter().sum::<f64>() / row.len() as f64
    }
}

fn check_sizes(sizes: &[usize]) -> Result<(), EvalError> {
    if sizes.is_empty() {
        return Err(EvalError::InvalidSizes("no sizes given".into()));
    }
    if sizes[0] == 0 {
        return Err(EvalError::InvalidSizes("sizes must be positive".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidSizes(
            "sizes must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Splits `sizes` into those every sense can supply and those it cannot.
pub fn feasible_sizes(train: &LabeledDataset, sizes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let counts = train.class_counts();
    let limit = SenseType::ALL
        .iter()
        .map(|s| counts.get(s).copied().unwrap_or(0))
        .min()
        .unwrap_or(0);
    sizes.iter().partition(|&&m| m <= limit)
}

/// Per-class draws for every size; each draw extends the previous one.
pub fn nested_draws(
    train: &LabeledDataset,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    check_sizes(sizes)?;
    let by_class = shuffled_class_indices(train, derive_seed(seed, "curve/draw"));
    let largest = *sizes.last().expect("nonempty");
    if let Some((sense, available)) = SenseType::ALL
        .iter()
        .map(|s| (*s, by_class.get(s).map_or(0, Vec::len)))
        .filter(|&(_, n)| n < largest)
        .min_by_key(|&(_, n)| n)
    {
        let size = *sizes
            .iter()
            .find(|&&m| m > available)
            .expect("some size exceeds");
        return Err(EvalError::InfeasibleSize {
            size,
            sense,
            available,
        });
    }
    Ok(sizes
        .iter()
        .map(|&m| {
            let mut rows: Vec<usize> = by_class
                .values()
                .flat_map(|idx| idx[..m].iter().copied())
                .collect();
            rows.sort_unstable();
            rows
        })
        .collect())
}

/// Runs the one-vs-all protocol on nested per-class draws of each size.
/// Validation is the full dataset, or the held-out part when
/// `holdout_fraction > 0`.
pub fn learning_curve(
    spec: &ClassifierSpec,
    dataset: &LabeledDataset,
    sizes: &[usize],
    holdout_fraction: f64,
    seed: u64,
) -> Result<LearningCurve, EvalError> {
    let (train, validation) = holdout_split(dataset, holdout_fraction, seed)?;
    let draws = nested_draws(&train, sizes, seed)?;
    let mut accuracy = Vec::with_capacity(sizes.len());
    for (&m, rows) in sizes.iter().zip(&draws) {
        log::info!("learning curve: {m} per class");
        let drawn = train.subset(rows);
        let cells = one_vs_all_split(
            spec,
            &drawn,
            &validation,
            derive_seed(seed, &format!("curve/{m}")),
        )?;
        accuracy.push(
            SenseType::ALL
                .iter()
                .map(|s| cells[s].accuracy.accuracy)
                .collect(),
        );
    }
    Ok(LearningCurve {
        kind: spec.kind(),
        rng_seed: seed,
        sizes: sizes.to_vec(),
        senses: SenseType::ALL.to_vec(),
        accuracy,
    })
}
