//! End-to-end orchestration: corpus to reports, one named stage at a time.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classifiers::ClassifierKind;
use crate::config::PipelineConfig;
use crate::corpus::{build_vocabulary, load_corpus, Corpus, KeepRanges};
use crate::embedding::{
    load_embeddings, save_embeddings, train_skipgram_parallel, EmbeddingModel, SkipGramConfig,
};
use crate::eval::{
    compare_segmentation, evaluate, feasible_sizes, holdout_split, learning_curve, render,
    DeltaRow, EvalOptions, EvaluationReport, LearningCurve, ReportFormat, ReportItem,
};
use crate::lexicon::{attach_vectors, load_lexicon, LabeledDataset, LexiconEntry};
use crate::morph::{train_segmenter, SegmentationModel, SegmenterConfig};
use crate::seed::derive_seed;

pub const LOAD_CORPUS: &str = "load_corpus";
pub const TRAIN_MORPH: &str = "train_morph";
pub const SEGMENT: &str = "segment";
pub const TRAIN_EMBEDDINGS: &str = "train_embeddings";
pub const LOAD_LEXICON: &str = "load_lexicon";
pub const BUILD_DATASET: &str = "build_dataset";
pub const EVALUATE: &str = "evaluate";
pub const BASELINE: &str = "baseline";
pub const COMPARE_SEGMENTATION: &str = "compare_segmentation";
pub const LEARNING_CURVE: &str = "learning_curve";

pub const PARTIAL_SUFFIX: &str = ".partial";

#[derive(Debug, Error)]
#[error("stage {stage} failed: {cause}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub cause: Box<dyn std::error::Error + Send + Sync>,
}

trait AtStage<T> {
    fn at(self, stage: &'static str) -> Result<T, PipelineError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> AtStage<T> for Result<T, E> {
    fn at(self, stage: &'static str) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            cause: Box::new(e),
        })
    }
}

/// Seed handed to a stage: independent of every other stage's seed.
pub fn stage_seed(master_seed: u64, stage: &str) -> u64 {
    derive_seed(master_seed, stage)
}

/// Worker threads for embedding training. `1` is the reproducible mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { threads: 1 }
    }
}

/// Writes `path` through a `<path>.partial` sibling that is renamed into place
/// only once `write` has succeeded. On failure the partial file stays behind.
pub fn write_artifact<E>(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
) -> Result<(), E>
where
    E: From<io::Error>,
{
    let mut partial = path.as_os_str().to_owned();
    partial.push(PARTIAL_SUFFIX);
    let partial = PathBuf::from(partial);
    let mut out = BufWriter::new(File::create(&partial)?);
    write(&mut out)?;
    out.flush()?;
    drop(out);
    fs::rename(&partial, path)?;
    Ok(())
}

pub fn write_text_artifact(path: &Path, text: &str) -> io::Result<()> {
    write_artifact(path, |w| w.write_all(text.as_bytes()))
}

pub fn read_corpus(path: &Path, keep: &KeepRanges) -> Result<Corpus, PipelineError> {
    load_corpus(path, keep).at(LOAD_CORPUS)
}

pub fn train_morph(
    corpus: &Corpus,
    config: &SegmenterConfig,
) -> Result<SegmentationModel, PipelineError> {
    train_segmenter(&build_vocabulary(corpus, 1), config).at(TRAIN_MORPH)
}

/// Trains vectors and returns them as they read back from the text format, so
/// later stages see exactly what `vec.txt` holds.
pub fn train_embeddings(
    corpus: &Corpus,
    config: &SkipGramConfig,
    threads: usize,
) -> Result<EmbeddingModel, PipelineError> {
    let model = train_skipgram_parallel(corpus, config, threads).at(TRAIN_EMBEDDINGS)?;
    let mut text = Vec::new();
    save_embeddings(&model, &mut text).at(TRAIN_EMBEDDINGS)?;
    load_embeddings(text.as_slice()).at(TRAIN_EMBEDDINGS)
}

pub fn read_lexicon_entries(path: &Path) -> Result<Vec<LexiconEntry>, PipelineError> {
    let lexicon = load_lexicon(path).at(LOAD_LEXICON)?;
    for d in &lexicon.duplicates {
        if d.conflicting {
            log::warn!(
                "{}: line {} repeats {:?} from line {} with a different sense; keeping the first",
                path.display(),
                d.line,
                d.word,
                d.first_line
            );
        }
    }
    Ok(lexicon.deduplicated())
}

pub fn build_dataset(
    entries: &[LexiconEntry],
    embedding: &EmbeddingModel,
    morph: Option<&SegmentationModel>,
) -> LabeledDataset {
    let dataset = attach_vectors(entries, embedding, morph);
    log::info!(
        "dataset: {} of {} lexicon entries resolved (coverage {:.4})",
        dataset.len(),
        entries.len(),
        dataset.coverage
    );
    dataset
}

/// Everything a completed run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Artifact paths in the order they were written.
    pub artifacts: Vec<PathBuf>,
    pub report: EvaluationReport,
    /// Unsegmented run of the same protocol, when segmentation is compared.
    pub baseline: Option<EvaluationReport>,
    pub delta: Option<Vec<DeltaRow>>,
    pub curve: Option<LearningCurve>,
    /// Learning-curve sizes skipped because some sense had too few samples.
    pub dropped_sizes: Vec<usize>,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write<E>(
        &mut self,
        stage: &'static str,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>,
    ) -> Result<(), PipelineError>
    where
        E: std::error::Error + Send + Sync + From<io::Error> + 'static,
    {
        let path = self.path(name);
        write_artifact(&path, write).at(stage)?;
        self.written.push(path);
        Ok(())
    }

    fn report(
        &mut self,
        stage: &'static str,
        stem: &str,
        item: ReportItem<'_>,
    ) -> Result<(), PipelineError> {
        for format in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg] {
            let text = render(item, format).at(stage)?;
            self.write(stage, &format!("{stem}.{}", format.extension()), |w| {
                w.write_all(text.as_bytes())
            })?;
        }
        Ok(())
    }
}

fn overall_fractions(report: &EvaluationReport) -> BTreeMap<ClassifierKind, f64> {
    report
        .overall
        .iter()
        .map(|(k, a)| (*k, a.accuracy))
        .collect()
}

/// Runs every stage in order, writing artifacts under `config.out_dir`.
pub fn run_pipeline(
    config: &PipelineConfig,
    options: &RunOptions,
) -> Result<RunSummary, PipelineError> {
    config.validate().at("config")?;
    let master = config.master_seed;
    fs::create_dir_all(&config.out_dir).at("config")?;
    let mut out = Artifacts {
        dir: config.out_dir.clone(),
        written: Vec::new(),
    };

    log::info!("stage {LOAD_CORPUS}: {}", config.corpus_path.display());
    let corpus = read_corpus(&config.corpus_path, &config.keep().at("config")?)?;
    log::info!(
        "{} sentences, {} tokens",
        corpus.line_count(),
        corpus.token_count()
    );
    out.write(LOAD_CORPUS, "corpus.normalized.txt", |w| {
        corpus.write_text(w)
    })?;

    let morph = if config.morph.enabled {
        log::info!("stage {TRAIN_MORPH}");
        let model = train_morph(
            &corpus,
            &config
                .morph
                .segmenter_config(stage_seed(master, TRAIN_MORPH)),
        )?;
        out.write(TRAIN_MORPH, "morph.json", |w| model.write_json(w))?;
        Some(model)
    } else {
        None
    };

    let segmented = match &morph {
        Some(model) => {
            log::info!("stage {SEGMENT}");
            let seg = model.segment_corpus(&corpus);
            out.write(SEGMENT, "corpus.segmented.txt", |w| seg.write_text(w))?;
            Some(seg)
        }
        None => None,
    };

    log::info!("stage {TRAIN_EMBEDDINGS}");
    let embed_config = SkipGramConfig {
        rng_seed: stage_seed(master, TRAIN_EMBEDDINGS),
        ..config.embedding.clone()
    };
    let embedding = train_embeddings(
        segmented.as_ref().unwrap_or(&corpus),
        &embed_config,
        options.threads,
    )?;
    out.write(TRAIN_EMBEDDINGS, "vec.txt", |w| {
        save_embeddings(&embedding, w)
    })?;

    log::info!("stage {LOAD_LEXICON}: {}", config.lexicon_path.display());
    let entries = read_lexicon_entries(&config.lexicon_path)?;

    log::info!("stage {BUILD_DATASET}");
    let dataset = build_dataset(&entries, &embedding, morph.as_ref());
    out.write(BUILD_DATASET, "dataset.tsv", |w| dataset.write_tsv(w))?;

    log::info!("stage {EVALUATE}");
    let eval_seed = stage_seed(master, EVALUATE);
    let eval_options = EvalOptions {
        holdout_fraction: config.eval.holdout_fraction,
        segmented: morph.is_some(),
        per_sense: config.eval.per_sense,
    };
    let run = evaluate(&config.classifiers, &dataset, &eval_options, eval_seed).at(EVALUATE)?;
    for model in &run.models {
        out.write(EVALUATE, &format!("model.{}.json", model.kind()), |w| {
            model.write_json(w)
        })?;
    }
    out.report(EVALUATE, "report", ReportItem::Evaluation(&run.report))?;

    let (baseline, delta) = if morph.is_some() && config.eval.compare_segmentation {
        log::info!("stage {BASELINE}: unsegmented corpus");
        let plain = train_embeddings(&corpus, &embed_config, options.threads).map_err(|e| {
            PipelineError {
                stage: BASELINE,
                cause: e.cause,
            }
        })?;
        out.write(BASELINE, "vec.unsegmented.txt", |w| {
            save_embeddings(&plain, w)
        })?;
        let plain_data = build_dataset(&entries, &plain, None);
        out.write(BASELINE, "dataset.unsegmented.tsv", |w| {
            plain_data.write_tsv(w)
        })?;
        let options = EvalOptions {
            segmented: false,
            per_sense: false,
            ..eval_options
        };
        let before = evaluate(&config.classifiers, &plain_data, &options, eval_seed)
            .at(BASELINE)?
            .report;
        out.report(
            BASELINE,
            "report.unsegmented",
            ReportItem::Evaluation(&before),
        )?;

        log::info!("stage {COMPARE_SEGMENTATION}");
        let rows =
            compare_segmentation(&overall_fractions(&before), &overall_fractions(&run.report))
                .at(COMPARE_SEGMENTATION)?;
        out.report(COMPARE_SEGMENTATION, "delta", ReportItem::Delta(&rows))?;
        (Some(before), Some(rows))
    } else {
        (None, None)
    };

    let mut dropped_sizes = Vec::new();
    let curve = if config.eval.sizes.is_empty() {
        None
    } else {
        log::info!("stage {LEARNING_CURVE}");
        let seed = stage_seed(master, LEARNING_CURVE);
        let (train, _) =
            holdout_split(&dataset, config.eval.holdout_fraction, seed).at(LEARNING_CURVE)?;
        let (sizes, dropped) = feasible_sizes(&train, &config.eval.sizes);
        if !dropped.is_empty() {
            log::warn!(
                "learning curve: skipping sizes {dropped:?}, some sense has fewer training samples"
            );
        }
        dropped_sizes = dropped;
        if sizes.is_empty() {
            None
        } else {
            let curve = learning_curve(
                &config.curve_spec(),
                &dataset,
                &sizes,
                config.eval.holdout_fraction,
                seed,
            )
            .at(LEARNING_CURVE)?;
            out.report(LEARNING_CURVE, "curve", ReportItem::Curve(&curve))?;
            Some(curve)
        }
    };

    Ok(RunSummary {
        out_dir: out.dir,
        artifacts: out.written,
        report: run.report,
        baseline,
        delta,
        curve,
        dropped_sizes,
    })
}

/// Reads vectors from the text format.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingModel, PipelineError> {
    let file = File::open(path).at(TRAIN_EMBEDDINGS)?;
    load_embeddings(BufReader::new(file)).at(TRAIN_EMBEDDINGS)
}

pub fn read_morph(path: &Path) -> Result<SegmentationModel, PipelineError> {
    let file = File::open(path).at(TRAIN_MORPH)?;
    SegmentationModel::read_json(BufReader::new(file)).at(TRAIN_MORPH)
}
