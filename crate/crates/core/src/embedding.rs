//! Skip-gram word embeddings trained with negative sampling.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{build_vocabulary, Corpus, Vocabulary};
use crate::matrix::{dot, Matrix};

/// Entries in the negative-sampling table.
pub const NEGATIVE_TABLE_SIZE: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("no token survives min_count={0}; nothing to train")]
    EmptyVocabulary(u64),
    #[error("invalid skip-gram config: {0}")]
    Config(String),
    #[error("vectors must have equal nonzero length (got {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub subsample_t: f64,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub unigram_exponent: f64,
    pub rng_seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            min_count: 5,
            subsample_t: 1e-3,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            unigram_exponent: 0.75,
            rng_seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let fail = |msg: &str| Err(EmbeddingError::Config(msg.to_owned()));
        if self.dim == 0 {
            return fail("dim must be >= 1");
        }
        if self.window == 0 {
            return fail("window must be >= 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be >= 1");
        }
        if self.min_count == 0 {
            return fail("min_count must be >= 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if !(self.subsample_t >= 0.0 && self.subsample_t.is_finite()) {
            return fail("subsample_t must be a finite nonnegative number");
        }
        if !(self.lr_end > 0.0 && self.lr_start > self.lr_end && self.lr_start.is_finite()) {
            return fail("learning rates must satisfy lr_start > lr_end > 0");
        }
        if !self.unigram_exponent.is_finite() {
            return fail("unigram_exponent must be finite");
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Derivative of the negative-sampling loss with respect to a score `u·v`,
/// for a true context (`label = 1`) or a noise word (`label = 0`).
#[inline]
fn score_gradient(score: f64, label: f64) -> f64 {
    sigmoid(score) - label
}

/// Negative log-likelihood of one (center, context) pair with its noise words:
/// `-(ln σ(u_o·v) + Σ ln σ(-u_n·v))`.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    -log_sigmoid(dot(context, center))
        - negatives
            .iter()
            .map(|u| log_sigmoid(-dot(u, center)))
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradients of [`sgns_loss`].
pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradients {
    let g_pos = score_gradient(dot(context, center), 1.0);
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context = center.iter().map(|v| g_pos * v).collect();
    let d_negs = negatives
        .iter()
        .map(|u| {
            let g = score_gradient(dot(u, center), 0.0);
            for (dc, ui) in d_center.iter_mut().zip(u.iter()) {
                *dc += g * ui;
            }
            center.iter().map(|v| g * v).collect()
        })
        .collect();
    SgnsGradients {
        center: d_center,
        context: d_context,
        negatives: d_negs,
    }
}

/// Learning rate after `processed` of `total` tokens, decaying linearly.
pub fn learning_rate(config: &SkipGramConfig, processed: u64, total: u64) -> f64 {
    let f = if total == 0 {
        0.0
    } else {
        (processed as f64 / total as f64).min(1.0)
    };
    config.lr_start + f * (config.lr_end - config.lr_start)
}

/// Probability of dropping one occurrence of a word with corpus frequency
/// `count / total`: `1 - sqrt(t / f)`, clipped to `[0, 1]`.
pub fn discard_probability(count: u64, total: u64, t: f64) -> f64 {
    if t <= 0.0 || count == 0 || total == 0 {
        return 0.0;
    }
    let f = count as f64 / total as f64;
    (1.0 - (t / f).sqrt()).clamp(0.0, 1.0)
}

/// Noise distribution `count^exponent`, materialized as a lookup table.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    table: Vec<u32>,
    probabilities: Vec<f64>,
}

impl NegativeTable {
    /// Fills slot `a` with word `i` while `a / size` has not passed the
    /// cumulative probability of words `0..=i`.
    pub fn new(counts: &[u64], exponent: f64, size: usize) -> Self {
        assert!(!counts.is_empty() && size > 0);
        let powered: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let norm: f64 = powered.iter().sum();
        let probabilities: Vec<f64> = powered.iter().map(|p| p / norm).collect();
        let mut table = Vec::with_capacity(size);
        let mut word = 0usize;
        let mut cumulative = probabilities[0];
        for a in 0..size {
            table.push(word as u32);
            if (a as f64 / size as f64) > cumulative && word + 1 < counts.len() {
                word += 1;
                cumulative += probabilities[word];
            }
        }
        NegativeTable {
            table,
            probabilities,
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Fraction of table slots holding each word.
    pub fn table_frequencies(&self) -> Vec<f64> {
        let mut freq = vec![0.0; self.probabilities.len()];
        for &w in &self.table {
            freq[w as usize] += 1.0;
        }
        freq.iter_mut().for_each(|f| *f /= self.table.len() as f64);
        freq
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.table[rng.random_range(0..self.table.len())] as usize
    }
}

/// Row-major weight storage shared by the sequential and lock-free trainers.
trait Weights {
    fn read_row(&self, row: usize, out: &mut [f64]);
    fn add_row(&mut self, row: usize, scale: f64, delta: &[f64]);
}

struct Owned<'a> {
    data: &'a mut [f64],
    dim: usize,
}

impl Weights for Owned<'_> {
    fn read_row(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    fn add_row(&mut self, row: usize, scale: f64, delta: &[f64]) {
        for (w, d) in self.data[row * self.dim..(row + 1) * self.dim]
            .iter_mut()
            .zip(delta)
        {
            *w += scale * d;
        }
    }
}

/// Hogwild-style storage: racing updates may be lost.
#[derive(Clone, Copy)]
struct Shared<'a> {
    data: &'a [AtomicU64],
    dim: usize,
}

impl Weights for Shared<'_> {
    fn read_row(&self, row: usize, out: &mut [f64]) {
        for (o, a) in out
            .iter_mut()
            .zip(&self.data[row * self.dim..(row + 1) * self.dim])
        {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn add_row(&mut self, row: usize, scale: f64, delta: &[f64]) {
        for (a, d) in self.data[row * self.dim..(row + 1) * self.dim]
            .iter()
            .zip(delta)
        {
            let v = f64::from_bits(a.load(Ordering::Relaxed)) + scale * d;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

struct TrainPlan<'a> {
    config: &'a SkipGramConfig,
    counts: Vec<u64>,
    total_count: u64,
    total_work: u64,
    negatives: NegativeTable,
    progress: AtomicU64,
}

fn train_chunk<W: Weights>(
    plan: &TrainPlan<'_>,
    sentences: &[Vec<u32>],
    input: &mut W,
    output: &mut W,
    rng: &mut ChaCha8Rng,
) {
    let config = plan.config;
    let dim = config.dim;
    let mut center = vec![0.0; dim];
    let mut center_grad = vec![0.0; dim];
    let mut target = vec![0.0; dim];
    let mut kept = Vec::new();
    for _ in 0..config.epochs {
        for sentence in sentences {
            let processed = plan
                .progress
                .fetch_add(sentence.len() as u64, Ordering::Relaxed);
            let lr = learning_rate(config, processed, plan.total_work);
            kept.clear();
            for &w in sentence {
                let p = discard_probability(
                    plan.counts[w as usize],
                    plan.total_count,
                    config.subsample_t,
                );
                if p == 0.0 || rng.random::<f64>() >= p {
                    kept.push(w as usize);
                }
            }
            for pos in 0..kept.len() {
                let c = kept[pos];
                let reach = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (ctx_pos, &o) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    input.read_row(c, &mut center);
                    center_grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=config.negatives {
                        let (t, label) = if k == 0 {
                            (o, 1.0)
                        } else {
                            let n = plan.negatives.sample(rng);
                            if n == o {
                                continue;
                            }
                            (n, 0.0)
                        };
                        output.read_row(t, &mut target);
                        let g = score_gradient(dot(&target, &center), label);
                        for (cg, u) in center_grad.iter_mut().zip(&target) {
                            *cg += g * u;
                        }
                        output.add_row(t, -lr * g, &center);
                    }
                    input.add_row(c, -lr, &center_grad);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    words: Vec<String>,
    index: HashMap<String, usize>,
    input_vectors: Matrix,
    output_vectors: Option<Matrix>,
    vocab: Option<Vocabulary>,
    config: Option<SkipGramConfig>,
}

fn prepare(
    corpus: &Corpus,
    config: &SkipGramConfig,
) -> Result<(Vocabulary, Vec<Vec<u32>>), EmbeddingError> {
    config.validate()?;
    let vocab = build_vocabulary(corpus, config.min_count);
    if vocab.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary(config.min_count));
    }
    let sentences = corpus
        .sentences()
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| vocab.index_of(t).map(|i| i as u32))
                .collect::<Vec<_>>()
        })
        .filter(|s: &Vec<u32>| !s.is_empty())
        .collect();
    Ok((vocab, sentences))
}

fn init_input(vocab_len: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let half = 0.5 / dim as f64;
    (0..vocab_len * dim)
        .map(|_| rng.random_range(-half..half))
        .collect()
}

fn make_plan<'a>(
    config: &'a SkipGramConfig,
    vocab: &Vocabulary,
    sentences: &[Vec<u32>],
) -> TrainPlan<'a> {
    let counts: Vec<u64> = vocab.entries().iter().map(|(_, c)| *c).collect();
    let retained: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    TrainPlan {
        config,
        negatives: NegativeTable::new(&counts, config.unigram_exponent, NEGATIVE_TABLE_SIZE),
        counts,
        total_count: vocab.total_count(),
        total_work: retained * config.epochs as u64,
        progress: AtomicU64::new(0),
    }
}

/// Deterministic single-threaded training.
pub fn train_skipgram(
    corpus: &Corpus,
    config: &SkipGramConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    let (vocab, sentences) = prepare(corpus, config)?;
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut input = init_input(vocab.len(), dim, &mut rng);
    let mut output = vec![0.0; vocab.len() * dim];
    let plan = make_plan(config, &vocab, &sentences);
    train_chunk(
        &plan,
        &sentences,
        &mut Owned {
            data: &mut input,
            dim,
        },
        &mut Owned {
            data: &mut output,
            dim,
        },
        &mut rng,
    );
    Ok(EmbeddingModel::from_training(
        vocab,
        input,
        output,
        config.clone(),
    ))
}

/// Lock-free parallel training over `threads` sentence shards. Not reproducible
/// when `threads > 1`.
pub fn train_skipgram_parallel(
    corpus: &Corpus,
    config: &SkipGramConfig,
    threads: usize,
) -> Result<EmbeddingModel, EmbeddingError> {
    if threads <= 1 {
        return train_skipgram(corpus, config);
    }
    let (vocab, sentences) = prepare(corpus, config)?;
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let input: Vec<AtomicU64> = init_input(vocab.len(), dim, &mut rng)
        .into_iter()
        .map(|v| AtomicU64::new(v.to_bits()))
        .collect();
    let output: Vec<AtomicU64> = (0..vocab.len() * dim)
        .map(|_| AtomicU64::new(0.0f64.to_bits()))
        .collect();
    let plan = make_plan(config, &vocab, &sentences);
    let shard = sentences.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        for (t, chunk) in sentences.chunks(shard).enumerate() {
            let plan = &plan;
            let mut inp = Shared { data: &input, dim };
            let mut out = Shared { data: &output, dim };
            let seed = config
                .rng_seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(t as u64 + 1));
            scope.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                train_chunk(plan, chunk, &mut inp, &mut out, &mut rng);
            });
        }
    });
    let unwrap = |v: Vec<AtomicU64>| {
        v.into_iter()
            .map(|a| f64::from_bits(a.into_inner()))
            .collect()
    };
    Ok(EmbeddingModel::from_training(
        vocab,
        unwrap(input),
        unwrap(output),
        config.clone(),
    ))
}

impl EmbeddingModel {
    fn from_training(
        vocab: Vocabulary,
        input: Vec<f64>,
        output: Vec<f64>,
        config: SkipGramConfig,
    ) -> Self {
        let words: Vec<String> = vocab.entries().iter().map(|(w, _)| w.clone()).collect();
        let n = words.len();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        EmbeddingModel {
            words,
            index,
            input_vectors: Matrix::from_vec(n, config.dim, input),
            output_vectors: Some(Matrix::from_vec(n, config.dim, output)),
            vocab: Some(vocab),
            config: Some(config),
        }
    }

    /// Vectors-only model, as produced by [`load_embeddings`].
    pub fn from_vectors(words: Vec<String>, vectors: Matrix) -> Result<Self, EmbeddingError> {
        if words.len() != vectors.rows() {
            return Err(EmbeddingError::Config(format!(
                "{} words but {} vector rows",
                words.len(),
                vectors.rows()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(EmbeddingError::Config(format!("duplicate word {w:?}")));
            }
        }
        Ok(EmbeddingModel {
            words,
            index,
            input_vectors: vectors,
            output_vectors: None,
            vocab: None,
            config: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.input_vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Input vector of an in-vocabulary word.
    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.input_vectors.row(i))
    }

    pub fn input_vectors(&self) -> &Matrix {
        &self.input_vectors
    }

    pub fn output_vectors(&self) -> Option<&Matrix> {
        self.output_vectors.as_ref()
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocab.as_ref()
    }

    pub fn config(&self) -> Option<&SkipGramConfig> {
        self.config.as_ref()
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() || u.is_empty() {
        return Err(EmbeddingError::LengthMismatch(u.len(), v.len()));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Formats with 6 significant digits in the style of C's `%g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if (-4..6).contains(&exp) {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    }
}

/// Text format: `<vocab_size> <dim>` header, then `<word> <c1> ... <cdim>`.
pub fn save_embeddings<W: Write>(model: &EmbeddingModel, mut out: W) -> io::Result<()> {
    writeln!(out, "{} {}", model.len(), model.dim())?;
    let mut line = String::new();
    for (i, w) in model.words.iter().enumerate() {
        line.clear();
        line.push_str(w);
        for &v in model.input_vectors.row(i) {
            line.push(' ');
            let _ = write!(line, "{}", format_sig6(v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn load_embeddings<R: BufRead>(input: R) -> Result<EmbeddingModel, EmbeddingError> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(l) => l?,
        None => {
            return Err(EmbeddingError::Parse {
                line: 1,
                reason: "empty file, expected header".into(),
            })
        }
    };
    let bad_header = || EmbeddingError::Parse {
        line: 1,
        reason: format!("expected `<vocab_size> <dim>`, got {header:?}"),
    };
    let mut fields = header.split_whitespace();
    let (n, dim): (usize, usize) = match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) => (
            a.parse().map_err(|_| bad_header())?,
            b.parse().map_err(|_| bad_header())?,
        ),
        _ => return Err(bad_header()),
    };
    if dim == 0 {
        return Err(bad_header());
    }
    let mut words = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == n {
            return Err(EmbeddingError::Parse {
                line: line_no,
                reason: format!("more than the {n} vectors declared"),
            });
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().expect("nonblank line");
        let before = data.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| EmbeddingError::Parse {
                line: line_no,
                reason: format!("bad component {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(EmbeddingError::Parse {
                    line: line_no,
                    reason: "non-finite component".into(),
                });
            }
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(EmbeddingError::Parse {
                line: line_no,
                reason: format!("expected {dim} components, found {}", data.len() - before),
            });
        }
        words.push(word.to_owned());
    }
    if words.len() != n {
        return Err(EmbeddingError::Parse {
            line: words.len() + 2,
            reason: format!("header declares {n} vectors, found {}", words.len()),
        });
    }
    EmbeddingModel::from_vectors(words, Matrix::from_vec(n, dim, data)).map_err(|e| {
        EmbeddingError::Parse {
            line: 1,
            reason: e.to_string(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn small_config() -> SkipGramConfig {
        SkipGramConfig {
            dim: 8,
            min_count: 1,
            epochs: 2,
            ..Default::default()
        }
    }

    #[test]
    fn sigmoid_at_zero_halves_the_step() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(score_gradient(0.0, 1.0), -0.5);
        // fresh output vectors are zero, so the first step scales by (1 - 0.5)
        let g = sgns_gradients(&[1.0, 2.0], &[0.0, 0.0], &[]);
        assert_eq!(g.context, vec![-0.5, -1.0]);
    }

    #[test]
    fn negative_table_proportions() {
        let table = NegativeTable::new(&[8, 1], 0.75, 1_000_000);
        let expected = 8f64.powf(0.75) / (8f64.powf(0.75) + 1.0);
        assert!((table.probabilities()[0] - expected).abs() < 1e-12);
        assert!((expected - 0.8263).abs() < 5e-5);
        assert!((table.table_frequencies()[0] - expected).abs() < 1e-5);
    }

    #[test]
    fn discard_probability_formula() {
        assert_eq!(discard_probability(1, 1000, 1e-3), 0.0);
        let p = discard_probability(100, 1000, 1e-3);
        assert!((p - (1.0 - 0.01f64.sqrt())).abs() < 1e-12);
        assert_eq!(discard_probability(100, 1000, 0.0), 0.0);
    }

    #[test]
    fn learning_rate_decays_linearly() {
        let c = SkipGramConfig::default();
        assert_eq!(learning_rate(&c, 0, 100), c.lr_start);
        assert!((learning_rate(&c, 100, 100) - c.lr_end).abs() < 1e-15);
        let half = learning_rate(&c, 50, 100);
        assert!((half - (c.lr_start + c.lr_end) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = SkipGramConfig::default();
        assert!(c.validate().is_ok());
        c.lr_end = c.lr_start;
        assert!(matches!(c.validate(), Err(EmbeddingError::Config(_))));
        let c = SkipGramConfig {
            dim: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let corpus = Corpus::from_sentences(vec![vec!["a", "b"]]);
        let err = train_skipgram(
            &corpus,
            &SkipGramConfig {
                min_count: 5,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, EmbeddingError::EmptyVocabulary(5)));
    }

    #[test]
    fn lookup_contract() {
        let corpus = Corpus::from_sentences(vec![vec!["a", "b", "c", "a"]; 5]);
        let model = train_skipgram(&corpus, &small_config()).unwrap();
        let v = model.vector("a").unwrap();
        assert_eq!(v.len(), 8);
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(model.vector("a").unwrap(), v);
        assert!(model.vector("zzz").is_none());
        assert_eq!(model.input_vectors().rows(), 3);
        assert_eq!(model.output_vectors().unwrap().rows(), 3);
    }

    #[test]
    fn single_threaded_training_is_bit_reproducible() {
        let corpus = Corpus::from_sentences(vec![vec!["a", "b", "c", "a", "d"]; 20]);
        let a = train_skipgram(&corpus, &small_config()).unwrap();
        let b = train_skipgram(&corpus, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_training_produces_finite_vectors() {
        let corpus = Corpus::from_sentences(vec![vec!["a", "b", "c", "a", "d"]; 40]);
        let m = train_skipgram_parallel(&corpus, &small_config(), 4).unwrap();
        assert!(m.input_vectors().all_finite());
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(EmbeddingError::ZeroVector)
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(EmbeddingError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(-0.0123456789), "-0.0123457");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(0.00001234), "1.234e-05");
        assert_eq!(format_sig6(999999.6), "1e+06");
    }

    #[test]
    fn malformed_files_report_lines() {
        let err = load_embeddings(Cursor::new("")).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 1, .. }));
        let err = load_embeddings(Cursor::new("2 3\na 1 2 3\nb 1 2 3\nc 1 2 3\n")).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 4, .. }));
        let err = load_embeddings(Cursor::new("2 3\na 1 2 3\nb 1 x 3\n")).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 3, .. }));
        let err = load_embeddings(Cursor::new("2 3\na 1 2 3\n")).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 3, .. }));
        let err = load_embeddings(Cursor::new("two 3\n")).unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 1, .. }));
    }
}
