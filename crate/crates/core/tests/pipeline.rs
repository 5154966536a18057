use std::fs;
use std::path::Path;

use sensepipe_core::classifiers::{ClassifierKind, TrainedClassifier};
use sensepipe_core::config::{parse_config, PipelineConfig};
use sensepipe_core::eval::EvaluationReport;
use sensepipe_core::lexicon::LabeledDataset;
use sensepipe_core::pipeline::{run_pipeline, RunOptions};
use sensepipe_core::synthetic::{generate_language, LanguageConfig};

fn write_language(dir: &Path, tokens: usize) -> PipelineConfig {
    let lang = generate_language(&LanguageConfig {
        target_tokens: tokens,
        ..Default::default()
    });
    lang.corpus
        .write_text(fs::File::create(dir.join("corpus.txt")).unwrap())
        .unwrap();
    lang.write_lexicon(fs::File::create(dir.join("lexicon.tsv")).unwrap())
        .unwrap();
    let mut config = PipelineConfig::new(
        dir.join("corpus.txt"),
        dir.join("lexicon.tsv"),
        dir.join("out"),
    );
    config.embedding.dim = 30;
    config.eval.sizes = vec![5, 10, 20];
    config
}

#[test]
fn synthetic_run_writes_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_language(dir.path(), 60_000);
    let summary = run_pipeline(&config, &RunOptions::default()).unwrap();
    let out = &config.out_dir;
    for name in [
        "vec.txt",
        "morph.json",
        "dataset.tsv",
        "report.csv",
        "report.json",
        "report.svg",
        "delta.csv",
        "curve.csv",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    for kind in ClassifierKind::ALL {
        let path = out.join(format!("model.{kind}.json"));
        let model = TrainedClassifier::read_json(fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(model.kind(), kind);
    }
    let leftovers: Vec<_> = fs::read_dir(out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
        .collect();
    assert!(leftovers.is_empty());
    assert_eq!(summary.artifacts.len(), fs::read_dir(out).unwrap().count());

    let report: EvaluationReport =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report, summary.report);
    assert!(report.condition.segmented);
    assert_eq!(report.overall.len(), 7);
    assert_eq!(summary.delta.as_ref().unwrap().len(), 7);
    let curve = summary.curve.as_ref().unwrap();
    assert_eq!(curve.sizes, vec![5, 10, 20]);
    assert!(fs::read_to_string(out.join("delta.csv"))
        .unwrap()
        .starts_with("kind,before,after,delta\n"));
}

#[test]
fn dataset_artifact_matches_the_evaluated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_language(dir.path(), 30_000);
    config.classifiers.truncate(1);
    config.eval.sizes.clear();
    config.eval.compare_segmentation = false;
    let summary = run_pipeline(&config, &RunOptions::default()).unwrap();
    let dataset = LabeledDataset::load(&config.out_dir.join("dataset.tsv")).unwrap();
    assert_eq!(dataset.coverage, summary.report.coverage);
    assert!(summary.baseline.is_none() && summary.delta.is_none() && summary.curve.is_none());
    assert!(!config.out_dir.join("delta.csv").exists());
}

#[test]
fn morph_disabled_skips_segmentation_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_language(dir.path(), 30_000);
    config.morph.enabled = false;
    config.classifiers.truncate(2);
    config.eval.sizes.clear();
    let summary = run_pipeline(&config, &RunOptions::default()).unwrap();
    assert!(!summary.report.condition.segmented);
    assert!(!config.out_dir.join("morph.json").exists());
    assert!(!config.out_dir.join("delta.csv").exists());
}

#[test]
fn infeasible_curve_sizes_are_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_language(dir.path(), 30_000);
    config.classifiers.truncate(1);
    config.eval.compare_segmentation = false;
    config.eval.sizes = vec![10, 100_000];
    let summary = run_pipeline(&config, &RunOptions::default()).unwrap();
    assert_eq!(summary.dropped_sizes, vec![100_000]);
    assert_eq!(summary.curve.unwrap().sizes, vec![10]);
}

#[test]
fn config_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("conf");
    fs::create_dir(&sub).unwrap();
    fs::write(
        sub.join("run.json"),
        r#"{"corpus_path": "../c.txt", "lexicon_path": "/abs/l.tsv", "out_dir": "res"}"#,
    )
    .unwrap();
    let config = parse_config(&sub.join("run.json")).unwrap();
    assert_eq!(config.corpus_path, sub.join("../c.txt"));
    assert_eq!(config.lexicon_path, Path::new("/abs/l.tsv"));
    assert_eq!(config.out_dir, sub.join("res"));
}

#[test]
fn missing_lexicon_names_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = write_language(dir.path(), 20_000);
    config.lexicon_path = dir.path().join("absent.tsv");
    let err = run_pipeline(&config, &RunOptions::default()).unwrap_err();
    assert_eq!(err.stage, "load_lexicon");
    assert!(config.out_dir.join("vec.txt").is_file());
}
