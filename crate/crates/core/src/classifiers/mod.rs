//! Seven classifier families behind one fit / predict contract.
//!
//! Labels are small integer class codes. A fitted model remembers the sorted
//! set of codes it saw; score matrices have one column per code in that order,
//! and ties in an argmax go to the lowest code.

mod adaboost;
mod knn;
mod linear_svm;
mod mlp;
mod smo;
mod tree;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use adaboost::{AdaBoost, AdaBoostParams};
pub use knn::{Knn, KnnParams};
pub use linear_svm::{hinge_objective, pegasos_binary, LinearSvm, LinearSvmParams, PegasosFit};
pub use mlp::{Mlp, MlpParams};
pub use smo::{
    dual_objective, kkt_violations, rbf, rbf_kernel_matrix, solve_smo, GaussianSvm,
    GaussianSvmParams, SmoSolution,
};
pub use tree::{
    bootstrap_sample, DecisionTree, DecisionTreeParams, Node, RandomForest, RandomForestParams,
    Tree,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MAX_CLASSES: usize = 7;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data is empty")]
    EmptyData,
    #[error("{rows} feature rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("at most {MAX_CLASSES} classes are supported, found {0}")]
    TooManyClasses(usize),
    #[error("invalid hyperparameter {field}: {reason}")]
    Hyperparam { field: String, reason: String },
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: &str, reason: impl Into<String>) -> ClassifierError {
    ClassifierError::Hyperparam {
        field: field.to_owned(),
        reason: reason.into(),
    }
}

/// Classifier families, in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    LinearSvm,
    GaussianSvm,
    DecisionTree,
    RandomForest,
    #[serde(rename = "adaboost")]
    AdaBoost,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Knn,
        ClassifierKind::LinearSvm,
        ClassifierKind::GaussianSvm,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::AdaBoost,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::LinearSvm => "linear_svm",
            ClassifierKind::GaussianSvm => "gaussian_svm",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::AdaBoost => "adaboost",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown classifier kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hyperparams {
    Knn(KnnParams),
    LinearSvm(LinearSvmParams),
    GaussianSvm(GaussianSvmParams),
    DecisionTree(DecisionTreeParams),
    RandomForest(RandomForestParams),
    AdaBoost(AdaBoostParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Knn => Hyperparams::Knn(Default::default()),
            ClassifierKind::LinearSvm => Hyperparams::LinearSvm(Default::default()),
            ClassifierKind::GaussianSvm => Hyperparams::GaussianSvm(Default::default()),
            ClassifierKind::DecisionTree => Hyperparams::DecisionTree(Default::default()),
            ClassifierKind::RandomForest => Hyperparams::RandomForest(Default::default()),
            ClassifierKind::AdaBoost => Hyperparams::AdaBoost(Default::default()),
            ClassifierKind::Mlp => Hyperparams::Mlp(Default::default()),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Hyperparams::Knn(_) => ClassifierKind::Knn,
            Hyperparams::LinearSvm(_) => ClassifierKind::LinearSvm,
            Hyperparams::GaussianSvm(_) => ClassifierKind::GaussianSvm,
            Hyperparams::DecisionTree(_) => ClassifierKind::DecisionTree,
            Hyperparams::RandomForest(_) => ClassifierKind::RandomForest,
            Hyperparams::AdaBoost(_) => ClassifierKind::AdaBoost,
            Hyperparams::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    /// Parses a kind's hyperparameter object; absent fields take defaults and
    /// unknown fields are rejected. Errors carry the offending key path.
    pub fn from_json(kind: ClassifierKind, value: serde_json::Value) -> Result<Self, String> {
        fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, String> {
            serde_path_to_error::deserialize(v).map_err(|e| {
                let path = e.path().to_string();
                if path == "." {
                    format!("hyperparams: {}", e.inner())
                } else {
                    format!("hyperparams.{path}: {}", e.inner())
                }
            })
        }
        Ok(match kind {
            ClassifierKind::Knn => Hyperparams::Knn(parse(value)?),
            ClassifierKind::LinearSvm => Hyperparams::LinearSvm(parse(value)?),
            ClassifierKind::GaussianSvm => Hyperparams::GaussianSvm(parse(value)?),
            ClassifierKind::DecisionTree => Hyperparams::DecisionTree(parse(value)?),
            ClassifierKind::RandomForest => Hyperparams::RandomForest(parse(value)?),
            ClassifierKind::AdaBoost => Hyperparams::AdaBoost(parse(value)?),
            ClassifierKind::Mlp => Hyperparams::Mlp(parse(value)?),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Hyperparams::Knn(p) => serde_json::to_value(p),
            Hyperparams::LinearSvm(p) => serde_json::to_value(p),
            Hyperparams::GaussianSvm(p) => serde_json::to_value(p),
            Hyperparams::DecisionTree(p) => serde_json::to_value(p),
            Hyperparams::RandomForest(p) => serde_json::to_value(p),
            Hyperparams::AdaBoost(p) => serde_json::to_value(p),
            Hyperparams::Mlp(p) => serde_json::to_value(p),
        };
        v.expect("hyperparameters serialize")
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        match self {
            Hyperparams::Knn(p) => p.validate(),
            Hyperparams::LinearSvm(p) => p.validate(),
            Hyperparams::GaussianSvm(p) => p.validate(),
            Hyperparams::DecisionTree(p) => p.validate(),
            Hyperparams::RandomForest(p) => p.validate(),
            Hyperparams::AdaBoost(p) => p.validate(),
            Hyperparams::Mlp(p) => p.validate(),
        }
    }
}

/// What to fit: a kind with its hyperparameters and a seed.
///
/// JSON form: `{"kind": "gaussian_svm", "hyperparams": {"c": 10}, "rng_seed": 3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct ClassifierSpec {
    pub params: Hyperparams,
    pub rng_seed: u64,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    kind: ClassifierKind,
    #[serde(default)]
    hyperparams: Option<serde_json::Value>,
    #[serde(default)]
    rng_seed: u64,
}

impl TryFrom<SpecRepr> for ClassifierSpec {
    type Error = String;

    fn try_from(r: SpecRepr) -> Result<Self, String> {
        let value = r
            .hyperparams
            .unwrap_or_else(|| serde_json::Value::Object(Default::default()));
        Ok(ClassifierSpec {
            params: Hyperparams::from_json(r.kind, value)?,
            rng_seed: r.rng_seed,
        })
    }
}

impl From<ClassifierSpec> for SpecRepr {
    fn from(s: ClassifierSpec) -> Self {
        SpecRepr {
            kind: s.params.kind(),
            hyperparams: Some(s.params.to_json()),
            rng_seed: s.rng_seed,
        }
    }
}

impl ClassifierSpec {
    pub fn new(params: Hyperparams, rng_seed: u64) -> Self {
        ClassifierSpec { params, rng_seed }
    }

    pub fn default_for(kind: ClassifierKind, rng_seed: u64) -> Self {
        ClassifierSpec {
            params: Hyperparams::default_for(kind),
            rng_seed,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.params.kind()
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        ClassifierSpec {
            params: self.params.clone(),
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelState {
    Knn(Knn),
    LinearSvm(LinearSvm),
    GaussianSvm(GaussianSvm),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    AdaBoost(AdaBoost),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    spec: ClassifierSpec,
    class_codes: Vec<u8>,
    dim: usize,
    state: ModelState,
}

/// Checks shapes and finiteness; returns sorted class codes and per-row class indices.
fn prepare_labels(x: &Matrix, y: &[u8]) -> Result<(Vec<u8>, Vec<usize>), ClassifierError> {
    if x.rows() == 0 {
        return Err(ClassifierError::EmptyData);
    }
    if x.rows() != y.len() {
        return Err(ClassifierError::LabelCount {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    for (row, r) in x.iter_rows().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite { row, col });
        }
    }
    let mut codes = y.to_vec();
    codes.sort_unstable();
    codes.dedup();
    if codes.len() > MAX_CLASSES {
        return Err(ClassifierError::TooManyClasses(codes.len()));
    }
    let idx = y
        .iter()
        .map(|c| codes.binary_search(c).expect("code present"))
        .collect();
    Ok((codes, idx))
}

/// Fits a classifier. Deterministic given `spec.rng_seed`.
pub fn fit(
    spec: &ClassifierSpec,
    x: &Matrix,
    y: &[u8],
) -> Result<TrainedClassifier, ClassifierError> {
    spec.params.validate()?;
    let (class_codes, targets) = prepare_labels(x, y)?;
    let n_classes = class_codes.len();
    let seed = spec.rng_seed;
    let state = match &spec.params {
        Hyperparams::Knn(p) => ModelState::Knn(Knn::fit(p, x, &targets, n_classes)),
        Hyperparams::LinearSvm(p) => {
            ModelState::LinearSvm(LinearSvm::fit(p, x, &targets, n_classes, seed))
        }
        Hyperparams::GaussianSvm(p) => {
            ModelState::GaussianSvm(GaussianSvm::fit(p, x, &targets, n_classes))
        }
        Hyperparams::DecisionTree(p) => {
            ModelState::DecisionTree(DecisionTree::fit(p, x, &targets, n_classes))
        }
        Hyperparams::RandomForest(p) => {
            ModelState::RandomForest(RandomForest::fit(p, x, &targets, n_classes, seed))
        }
        Hyperparams::AdaBoost(p) => ModelState::AdaBoost(AdaBoost::fit(p, x, &targets, n_classes)),
        Hyperparams::Mlp(p) => ModelState::Mlp(Mlp::fit(p, x, &targets, n_classes, seed)),
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        class_codes,
        dim: x.cols(),
        state,
    })
}

/// Row-wise argmax; the first maximum wins.
pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    scores
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

impl TrainedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind()
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn class_codes(&self) -> &[u8] {
        &self.class_codes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    fn check_dim(&self, x: &Matrix) -> Result<(), ClassifierError> {
        if x.cols() != self.dim && !(x.rows() == 0 && x.cols() == 0) {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim,
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// Raw per-class scores, one column per class code:
    /// inverse-distance vote mass (knn), one-vs-rest margins (SVMs), leaf
    /// class fractions (tree), tree vote fractions (forest), stage-weighted
    /// vote mass (adaboost), softmax probabilities (mlp).
    pub fn predict_scores(&self, x: &Matrix) -> Result<Matrix, ClassifierError> {
        self.check_dim(x)?;
        let c = self.class_codes.len();
        if x.rows() == 0 {
            return Ok(Matrix::zeros(0, c));
        }
        Ok(match &self.state {
            ModelState::Knn(m) => m.scores(x),
            ModelState::LinearSvm(m) => m.scores(x),
            ModelState::GaussianSvm(m) => m.scores(x),
            ModelState::DecisionTree(m) => m.scores(x),
            ModelState::RandomForest(m) => m.scores(x),
            ModelState::AdaBoost(m) => m.scores(x),
            ModelState::Mlp(m) => m.scores(x),
        })
    }

    /// Scores normalized so each row sums to 1: softmax over SVM margins,
    /// share of the vote mass otherwise.
    pub fn confidences(&self, x: &Matrix) -> Result<Matrix, ClassifierError> {
        let mut scores = self.predict_scores(x)?;
        let c = scores.cols();
        for i in 0..scores.rows() {
            let row = scores.row_mut(i);
            match self.state {
                ModelState::LinearSvm(_) | ModelState::GaussianSvm(_) => softmax_in_place(row),
                _ => {
                    let sum: f64 = row.iter().sum();
                    if sum > 0.0 {
                        row.iter_mut().for_each(|v| *v /= sum);
                    } else {
                        row.iter_mut().for_each(|v| *v = 1.0 / c as f64);
                    }
                }
            }
        }
        Ok(scores)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>, ClassifierError> {
        let scores = self.predict_scores(x)?;
        Ok(argmax_rows(&scores)
            .into_iter()
            .map(|i| self.class_codes[i])
            .collect())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ClassifierError> {
        let envelope = Envelope {
            format_version: MODEL_FORMAT_VERSION,
            kind: self.kind(),
            hyperparams: self.spec.params.to_json(),
            class_codes: self.class_codes.clone(),
            state: StateEnvelope {
                dim: self.dim,
                rng_seed: self.spec.rng_seed,
                model: serde_json::to_value(&self.state)?,
            },
        };
        serde_json::to_writer_pretty(out, &envelope)?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String, ClassifierError> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, ClassifierError> {
        let env: Envelope = serde_json::from_reader(input)?;
        if env.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::Invalid(format!(
                "unsupported format_version {}",
                env.format_version
            )));
        }
        let params =
            Hyperparams::from_json(env.kind, env.hyperparams).map_err(ClassifierError::Invalid)?;
        let model = env.state.model;
        let state = match env.kind {
            ClassifierKind::Knn => ModelState::Knn(serde_json::from_value(model)?),
            ClassifierKind::LinearSvm => ModelState::LinearSvm(serde_json::from_value(model)?),
            ClassifierKind::GaussianSvm => ModelState::GaussianSvm(serde_json::from_value(model)?),
            ClassifierKind::DecisionTree => {
                ModelState::DecisionTree(serde_json::from_value(model)?)
            }
            ClassifierKind::RandomForest => {
                ModelState::RandomForest(serde_json::from_value(model)?)
            }
            ClassifierKind::AdaBoost => ModelState::AdaBoost(serde_json::from_value(model)?),
            ClassifierKind::Mlp => ModelState::Mlp(serde_json::from_value(model)?),
        };
        if env.class_codes.is_empty() || env.class_codes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ClassifierError::Invalid(
                "class_codes must be nonempty and strictly increasing".into(),
            ));
        }
        Ok(TrainedClassifier {
            spec: ClassifierSpec {
                params,
                rng_seed: env.state.rng_seed,
            },
            class_codes: env.class_codes,
            dim: env.state.dim,
            state,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    format_version: u32,
    kind: ClassifierKind,
    hyperparams: serde_json::Value,
    class_codes: Vec<u8>,
    state: StateEnvelope,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEnvelope {
    dim: usize,
    rng_seed: u64,
    model: serde_json::Value,
}
