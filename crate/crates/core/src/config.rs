//! Pipeline configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierKind, ClassifierSpec};
use crate::corpus::KeepRanges;
use crate::embedding::SkipGramConfig;
use crate::morph::{Dampening, SegmenterConfig};

pub const SEED_ENV: &str = "SENSEPIPE_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config error at {key}: {message}")]
    Parse { key: String, message: String },
    #[error("invalid config value {key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_owned(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphSection {
    pub enabled: bool,
    pub convergence_epsilon: f64,
    pub max_passes: usize,
    pub dampening: Dampening,
}

impl Default for MorphSection {
    fn default() -> Self {
        let d = SegmenterConfig::default();
        MorphSection {
            enabled: true,
            convergence_epsilon: d.convergence_epsilon,
            max_passes: d.max_passes,
            dampening: d.dampening,
        }
    }
}

impl MorphSection {
    pub fn segmenter_config(&self, rng_seed: u64) -> SegmenterConfig {
        SegmenterConfig {
            convergence_epsilon: self.convergence_epsilon,
            max_passes: self.max_passes,
            rng_seed,
            dampening: self.dampening,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub holdout_fraction: f64,
    /// Per-class training sizes for the learning curve; empty disables it.
    pub sizes: Vec<usize>,
    pub per_sense: bool,
    /// Also evaluate an unsegmented baseline and write the before/after table.
    pub compare_segmentation: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            holdout_fraction: 0.0,
            sizes: vec![50, 100, 200, 400],
            per_sense: true,
            compare_segmentation: true,
        }
    }
}

fn default_classifiers() -> Vec<ClassifierSpec> {
    ClassifierKind::ALL
        .iter()
        .map(|&k| ClassifierSpec::default_for(k, 0))
        .collect()
}

fn default_master_seed() -> u64 {
    42
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    pub lexicon_path: PathBuf,
    /// Inclusive codepoint ranges kept by normalization, e.g. `[["a", "z"]]`.
    /// Absent means the Telugu block plus ASCII letters and digits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_ranges: Option<Vec<(char, char)>>,
    #[serde(default)]
    pub morph: MorphSection,
    #[serde(default)]
    pub embedding: SkipGramConfig,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(
        corpus_path: impl Into<PathBuf>,
        lexicon_path: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        PipelineConfig {
            corpus_path: corpus_path.into(),
            lexicon_path: lexicon_path.into(),
            keep_ranges: None,
            morph: MorphSection::default(),
            embedding: SkipGramConfig::default(),
            classifiers: default_classifiers(),
            eval: EvalSection::default(),
            master_seed: default_master_seed(),
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.corpus_path.as_os_str().is_empty() {
            return Err(invalid("corpus_path", "must not be empty"));
        }
        if self.lexicon_path.as_os_str().is_empty() {
            return Err(invalid("lexicon_path", "must not be empty"));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(invalid("out_dir", "must not be empty"));
        }
        self.keep()?;
        if !(self.morph.convergence_epsilon.is_finite() && self.morph.convergence_epsilon >= 0.0) {
            return Err(invalid(
                "morph.convergence_epsilon",
                "must be a finite nonnegative number",
            ));
        }
        if self.morph.max_passes == 0 {
            return Err(invalid("morph.max_passes", "must be at least 1"));
        }
        self.embedding
            .validate()
            .map_err(|e| invalid("embedding", e.to_string()))?;
        if self.classifiers.is_empty() {
            return Err(invalid(
                "classifiers",
                "at least one classifier is required",
            ));
        }
        for (i, spec) in self.classifiers.iter().enumerate() {
            if self.classifiers[..i]
                .iter()
                .any(|s| s.kind() == spec.kind())
            {
                return Err(invalid(
                    &format!("classifiers[{i}].kind"),
                    format!("{} listed twice", spec.kind()),
                ));
            }
            spec.params
                .validate()
                .map_err(|e| invalid(&format!("classifiers[{i}]"), e.to_string()))?;
        }
        let h = self.eval.holdout_fraction;
        if !(0.0..1.0).contains(&h) {
            return Err(invalid(
                "eval.holdout_fraction",
                format!("must lie in [0, 1), got {h}"),
            ));
        }
        if self.eval.sizes.first() == Some(&0) || self.eval.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "eval.sizes",
                "must be positive and strictly increasing",
            ));
        }
        Ok(())
    }

    pub fn keep(&self) -> Result<KeepRanges, ConfigError> {
        let Some(ranges) = &self.keep_ranges else {
            return Ok(KeepRanges::default());
        };
        if let Some((lo, hi)) = ranges.iter().find(|(lo, hi)| lo > hi) {
            return Err(invalid(
                "keep_ranges",
                format!("range {lo:?}..={hi:?} is empty"),
            ));
        }
        KeepRanges::new(ranges.iter().map(|&(lo, hi)| lo..=hi).collect())
            .map_err(|e| invalid("keep_ranges", e.to_string()))
    }

    /// Applies `SENSEPIPE_SEED`, which takes precedence over `master_seed`.
    pub fn with_env_overrides(mut self) -> Result<Self, ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v.trim().parse().map_err(|_| {
                invalid(SEED_ENV, format!("expected an unsigned integer, got {v:?}"))
            })?;
        }
        Ok(self)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.corpus_path,
            &mut self.lexicon_path,
            &mut self.out_dir,
        ] {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
    }

    /// The classifier spec used for learning curves: the configured
    /// gaussian_svm if present, otherwise its defaults.
    pub fn curve_spec(&self) -> ClassifierSpec {
        self.classifiers
            .iter()
            .find(|s| s.kind() == ClassifierKind::GaussianSvm)
            .cloned()
            .unwrap_or_else(|| ClassifierSpec::default_for(ClassifierKind::GaussianSvm, 0))
    }
}

/// Parses and validates config JSON. Errors name the offending key path.
pub fn parse_config_str(text: &str) -> Result<PipelineConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let message = e.inner().to_string();
        ConfigError::Parse { key, message }
    })?;
    config.validate()?;
    Ok(config)
}

/// Reads a config file; relative paths inside it are taken relative to the
/// file's directory.
pub fn parse_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut config = parse_config_str(&text)?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(r#"{"corpus_path": "c.txt", "lexicon_path": "l.tsv"}"#).unwrap();
        assert!(c.morph.enabled);
        assert_eq!(c.master_seed, 42);
        assert_eq!(
            c.classifiers.iter().map(|s| s.kind()).collect::<Vec<_>>(),
            ClassifierKind::ALL.to_vec()
        );
        assert_eq!(c.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config_str(r#"{"corpus_path": "c", "lexicon_path": "l", "embeding": {}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("embeding"), "{err}");
        let err = parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "embedding": {"dimm": 3}}"#,
        )
        .unwrap_err();
        assert!(
            err.to_string().contains("embedding") && err.to_string().contains("dimm"),
            "{err}"
        );
        let err =
            parse_config_str(r#"{"corpus_path": "c", "lexicon_path": "l", "master_seed": "x"}"#)
                .unwrap_err();
        assert!(err.to_string().contains("master_seed"), "{err}");
    }

    #[test]
    fn classifier_hyperparam_errors_carry_their_path() {
        let err = parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "classifiers": [{"kind": "knn"}, {"kind": "mlp", "hyperparams": {"hiden": [3]}}]}"#,
        )
        .unwrap_err();
        let s = err.to_string();
        assert!(s.contains("classifiers[1]") && s.contains("hiden"), "{s}");
        let err = parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "classifiers": [{"kind": "knn", "hyperparams": {"k": 0}}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("knn.k"), "{err}");
    }

    #[test]
    fn keep_ranges_parse_and_validate() {
        let c = parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "keep_ranges": [["a", "z"]]}"#,
        )
        .unwrap();
        let keep = c.keep().unwrap();
        assert!(keep.contains('q') && !keep.contains('Q'));
        assert!(parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "keep_ranges": [["z", "a"]]}"#
        )
        .is_err());
        assert!(parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "keep_ranges": []}"#
        )
        .is_err());
    }

    #[test]
    fn holdout_of_one_is_rejected() {
        let err = parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "eval": {"holdout_fraction": 1.0}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("eval.holdout_fraction"), "{err}");
    }

    #[test]
    fn empty_paths_and_classifier_lists_are_rejected() {
        assert!(parse_config_str(r#"{"corpus_path": "", "lexicon_path": "l"}"#).is_err());
        assert!(parse_config_str(
            r#"{"corpus_path": "c", "lexicon_path": "l", "classifiers": []}"#
        )
        .is_err());
        assert!(parse_config_str(r#"{"corpus_path": "c", "lexicon_path": "l", "classifiers": [{"kind": "knn"}, {"kind": "knn"}]}"#).is_err());
    }
}
