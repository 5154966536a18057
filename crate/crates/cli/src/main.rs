//! `sensepipe`: command-line front end for the enrichment pipeline.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sensepipe_core::classifiers::{ClassifierKind, ClassifierSpec, Hyperparams, TrainedClassifier};
use sensepipe_core::config::{parse_config, PipelineConfig, SEED_ENV};
use sensepipe_core::corpus::{build_vocabulary, Vocabulary};
use sensepipe_core::embedding::{save_embeddings, SkipGramConfig};
use sensepipe_core::eval::{
    compare_segmentation, evaluate, learning_curve, render, train_model, EvalOptions, ReportFormat,
    ReportItem,
};
use sensepipe_core::lexicon::{enrich, write_enrichment_tsv, LabeledDataset};
use sensepipe_core::morph::{train_segmenter, SegmentationModel};
use sensepipe_core::pipeline::{
    self, run_pipeline, stage_seed, write_artifact, write_text_artifact, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "sensepipe",
    version,
    about = "Sense-type enrichment for annotated lexicons"
)]
struct Cli {
    /// Pipeline configuration (JSON); supplies defaults for every subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads. `1` makes every stage reproducible.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Master seed; overrides SENSEPIPE_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a raw corpus and optionally export its vocabulary.
    Normalize {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `token<TAB>count` rows here.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
    },
    /// Train the MDL segmenter on a vocabulary TSV.
    TrainMorph {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Segment a corpus file, or tokens from standard input.
    Segment {
        #[arg(long)]
        model: PathBuf,
        /// Normalized corpus to segment; without it tokens are read from stdin.
        #[arg(long, requires = "out")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train skip-gram vectors.
    TrainEmbeddings {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Segment the corpus with this model first.
        #[arg(long)]
        morph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Join a lexicon with vectors into a labeled dataset (.tsv or .bin).
    BuildDataset {
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        vectors: PathBuf,
        /// Fall back to stem lookup with this segmenter.
        #[arg(long)]
        morph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one classifier on the balanced dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        kind: ClassifierKind,
        /// Hyperparameters as JSON; defaults to the config entry for this kind.
        #[arg(long)]
        hyperparams: Option<String>,
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Overall and per-sense accuracy for a set of classifier kinds.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// `all` or a comma-separated list of kinds.
        #[arg(long, default_value = "all")]
        kinds: String,
        #[arg(long)]
        holdout: Option<f64>,
        /// Record the condition as segmented in the report.
        #[arg(long)]
        segmented: bool,
        /// Unsegmented dataset to compare against; writes delta reports.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Report formats to write.
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<ReportFormat>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Per-sense accuracy as the per-class training size grows.
    LearningCurve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value = "gaussian_svm")]
        kind: ClassifierKind,
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<ReportFormat>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Tag words with a predicted primary sense.
    Enrich {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        morph: Option<PathBuf>,
        /// One word per line; standard input when absent.
        #[arg(long)]
        words: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage as configured.
    Run {
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
    },
}

struct Settings {
    config: Option<PipelineConfig>,
    threads: usize,
}

impl Settings {
    fn master_seed(&self, arg: &SeedArg) -> Result<u64> {
        if let Some(s) = arg.seed {
            return Ok(s);
        }
        if let Some(c) = &self.config {
            return Ok(c.master_seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
            Err(_) => Ok(PipelineConfig::new("-", "-", "-").master_seed),
        }
    }

    fn path_or_config(
        &self,
        arg: &Option<PathBuf>,
        flag: &str,
        pick: fn(&PipelineConfig) -> &PathBuf,
    ) -> Result<PathBuf> {
        match (arg, &self.config) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(c)) => Ok(pick(c).clone()),
            (None, None) => bail!("--{flag} is required without --config"),
        }
    }

    fn embedding(&self) -> SkipGramConfig {
        self.config
            .as_ref()
            .map(|c| c.embedding.clone())
            .unwrap_or_default()
    }

    fn holdout(&self, arg: Option<f64>) -> f64 {
        arg.or(self.config.as_ref().map(|c| c.eval.holdout_fraction))
            .unwrap_or(0.0)
    }

    fn spec_for(&self, kind: ClassifierKind) -> ClassifierSpec {
        self.config
            .as_ref()
            .and_then(|c| c.classifiers.iter().find(|s| s.kind() == kind).cloned())
            .unwrap_or_else(|| ClassifierSpec::default_for(kind, 0))
    }

    fn specs(&self, kinds: &str) -> Result<Vec<ClassifierSpec>> {
        if kinds.trim() == "all" {
            return Ok(match &self.config {
                Some(c) => c.classifiers.clone(),
                None => ClassifierKind::ALL
                    .iter()
                    .map(|&k| ClassifierSpec::default_for(k, 0))
                    .collect(),
            });
        }
        kinds
            .split(',')
            .map(|k| {
                k.trim()
                    .parse::<ClassifierKind>()
                    .map(|k| self.spec_for(k))
                    .map_err(anyhow::Error::msg)
            })
            .collect()
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("cannot open {}", path.display())
    })?))
}

fn read_morph(path: &Path) -> Result<SegmentationModel> {
    SegmentationModel::read_json(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    LabeledDataset::load(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn write_reports(
    dir: &Path,
    stem: &str,
    item: ReportItem<'_>,
    formats: &[ReportFormat],
) -> Result<()> {
    for &f in formats {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        write_text_artifact(&path, &render(item, f)?)
            .with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn write_model(path: &Path, model: &TrainedClassifier) -> Result<()> {
    write_artifact(path, |w| model.write_json(w))
        .with_context(|| format!("writing {}", path.display()))
}

fn execute(command: Command, ctx: &Settings) -> Result<()> {
    match command {
        Command::Normalize {
            input,
            out,
            vocab,
            min_count,
        } => {
            let input = ctx.path_or_config(&input, "input", |c| &c.corpus_path)?;
            let keep = ctx
                .config
                .as_ref()
                .map(|c| c.keep())
                .transpose()?
                .unwrap_or_default();
            let corpus = pipeline::read_corpus(&input, &keep)?;
            write_artifact(&out, |w| corpus.write_text(w))?;
            if let Some(path) = vocab {
                let v = build_vocabulary(&corpus, min_count);
                write_artifact(&path, |w| v.write_tsv(w))?;
            }
            log::info!(
                "{} sentences, {} tokens",
                corpus.line_count(),
                corpus.token_count()
            );
        }
        Command::TrainMorph { vocab, out, seed } => {
            let v = Vocabulary::read_tsv(open(&vocab)?)
                .with_context(|| format!("reading {}", vocab.display()))?;
            let section = ctx
                .config
                .as_ref()
                .map(|c| c.morph.clone())
                .unwrap_or_default();
            let config = section
                .segmenter_config(stage_seed(ctx.master_seed(&seed)?, pipeline::TRAIN_MORPH));
            let model = train_segmenter(&v, &config)?;
            write_artifact(&out, |w| model.write_json(w))?;
        }
        Command::Segment { model, corpus, out } => {
            let model = read_morph(&model)?;
            match (corpus, out) {
                (Some(corpus), Some(out)) => {
                    let keep = ctx
                        .config
                        .as_ref()
                        .map(|c| c.keep())
                        .transpose()?
                        .unwrap_or_default();
                    let segmented = model.segment_corpus(&pipeline::read_corpus(&corpus, &keep)?);
                    write_artifact(&out, |w| segmented.write_text(w))?;
                }
                _ => {
                    let stdout = io::stdout();
                    let mut w = BufWriter::new(stdout.lock());
                    for line in io::stdin().lock().lines() {
                        for word in line?.split_whitespace() {
                            writeln!(w, "{word}\t{}", model.segment(word).morphemes.join("+"))?;
                        }
                    }
                    w.flush()?;
                }
            }
        }
        Command::TrainEmbeddings {
            corpus,
            morph,
            out,
            seed,
        } => {
            let path = ctx.path_or_config(&corpus, "corpus", |c| &c.corpus_path)?;
            let keep = ctx
                .config
                .as_ref()
                .map(|c| c.keep())
                .transpose()?
                .unwrap_or_default();
            let mut corpus = pipeline::read_corpus(&path, &keep)?;
            if let Some(m) = morph {
                corpus = read_morph(&m)?.segment_corpus(&corpus);
            }
            let config = SkipGramConfig {
                rng_seed: stage_seed(ctx.master_seed(&seed)?, pipeline::TRAIN_EMBEDDINGS),
                ..ctx.embedding()
            };
            let model = pipeline::train_embeddings(&corpus, &config, ctx.threads)?;
            write_artifact(&out, |w| save_embeddings(&model, w))?;
            log::info!("{} vectors of dimension {}", model.len(), model.dim());
        }
        Command::BuildDataset {
            lexicon,
            vectors,
            morph,
            out,
        } => {
            let lexicon = ctx.path_or_config(&lexicon, "lexicon", |c| &c.lexicon_path)?;
            let entries = pipeline::read_lexicon_entries(&lexicon)?;
            let embedding = pipeline::read_embeddings(&vectors)?;
            let morph = morph.as_deref().map(read_morph).transpose()?;
            let dataset = pipeline::build_dataset(&entries, &embedding, morph.as_ref());
            let bin = out.extension().is_some_and(|e| e == "bin");
            write_artifact(&out, |w| {
                if bin {
                    dataset.write_bin(w)
                } else {
                    dataset.write_tsv(w)
                }
            })?;
        }
        Command::Train {
            dataset,
            kind,
            hyperparams,
            holdout,
            out,
            seed,
        } => {
            let mut spec = ctx.spec_for(kind);
            if let Some(text) = hyperparams {
                let value: serde_json::Value =
                    serde_json::from_str(&text).context("--hyperparams is not JSON")?;
                spec.params = Hyperparams::from_json(kind, value).map_err(anyhow::Error::msg)?;
                spec.params.validate()?;
            }
            let data = read_dataset(&dataset)?;
            let eval_seed = stage_seed(ctx.master_seed(&seed)?, pipeline::EVALUATE);
            let model = train_model(&spec, &data, ctx.holdout(holdout), eval_seed)?;
            write_model(&out, &model)?;
        }
        Command::Evaluate {
            dataset,
            kinds,
            holdout,
            segmented,
            baseline,
            out_dir,
            format,
            seed,
        } => {
            let specs = ctx.specs(&kinds)?;
            let data = read_dataset(&dataset)?;
            let eval_seed = stage_seed(ctx.master_seed(&seed)?, pipeline::EVALUATE);
            let per_sense = ctx.config.as_ref().is_none_or(|c| c.eval.per_sense);
            let options = EvalOptions {
                holdout_fraction: ctx.holdout(holdout),
                segmented,
                per_sense,
            };
            fs::create_dir_all(&out_dir)?;
            let run = evaluate(&specs, &data, &options, eval_seed)?;
            for model in &run.models {
                write_model(&out_dir.join(format!("model.{}.json", model.kind())), model)?;
            }
            write_reports(
                &out_dir,
                "report",
                ReportItem::Evaluation(&run.report),
                &format,
            )?;
            if let Some(path) = baseline {
                let plain = read_dataset(&path)?;
                let options = EvalOptions {
                    segmented: false,
                    per_sense: false,
                    ..options
                };
                let before = evaluate(&specs, &plain, &options, eval_seed)?.report;
                write_reports(
                    &out_dir,
                    "report.unsegmented",
                    ReportItem::Evaluation(&before),
                    &format,
                )?;
                let fractions =
                    |r: &sensepipe_core::eval::EvaluationReport| -> BTreeMap<ClassifierKind, f64> {
                        r.overall.iter().map(|(k, a)| (*k, a.accuracy)).collect()
                    };
                let rows = compare_segmentation(&fractions(&before), &fractions(&run.report))?;
                write_reports(&out_dir, "delta", ReportItem::Delta(&rows), &format)?;
            }
        }
        Command::LearningCurve {
            dataset,
            sizes,
            kind,
            holdout,
            out_dir,
            format,
            seed,
        } => {
            let sizes = sizes
                .or(ctx.config.as_ref().map(|c| c.eval.sizes.clone()))
                .unwrap_or_else(|| vec![50, 100, 200, 400]);
            let data = read_dataset(&dataset)?;
            let curve_seed = stage_seed(ctx.master_seed(&seed)?, pipeline::LEARNING_CURVE);
            let curve = learning_curve(
                &ctx.spec_for(kind),
                &data,
                &sizes,
                ctx.holdout(holdout),
                curve_seed,
            )?;
            fs::create_dir_all(&out_dir)?;
            write_reports(&out_dir, "curve", ReportItem::Curve(&curve), &format)?;
        }
        Command::Enrich {
            model,
            vectors,
            morph,
            words,
            out,
        } => {
            let classifier = TrainedClassifier::read_json(open(&model)?)
                .with_context(|| format!("reading {}", model.display()))?;
            let embedding = pipeline::read_embeddings(&vectors)?;
            let morph = morph.as_deref().map(read_morph).transpose()?;
            let lines: Vec<String> = match words {
                Some(p) => open(&p)?.lines().collect::<io::Result<_>>()?,
                None => io::stdin().lock().lines().collect::<io::Result<_>>()?,
            };
            let words: Vec<String> = lines
                .iter()
                .map(|l| l.trim())
                .filter(|l| !l.is_empty())
                .map(str::to_owned)
                .collect();
            let rows = enrich(&words, &classifier, &embedding, morph.as_ref())?;
            write_artifact(&out, |w| write_enrichment_tsv(&rows, w))?;
            let resolved = rows.iter().filter(|r| r.predicted.is_some()).count();
            log::info!("tagged {resolved} of {} words", rows.len());
        }
        Command::Run { out_dir, seed } => {
            let Some(mut config) = ctx.config.clone() else {
                bail!("run needs --config");
            };
            if let Some(dir) = out_dir {
                config.out_dir = dir;
            }
            if let Some(s) = seed.seed {
                config.master_seed = s;
            }
            let summary = run_pipeline(
                &config,
                &RunOptions {
                    threads: ctx.threads,
                },
            )?;
            log::info!(
                "{} artifacts written to {}",
                summary.artifacts.len(),
                summary.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        let threads = match cli.threads {
            Some(0) => bail!("--threads must be at least 1"),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
        let config = match &cli.config {
            Some(p) => Some(parse_config(p)?.with_env_overrides()?),
            None => None,
        };
        execute(cli.command, &Settings { config, threads })
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
