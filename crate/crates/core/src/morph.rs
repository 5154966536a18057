//! Unsupervised morphological segmentation by two-part MDL.
//!
//! The model is a morph lexicon with counts. Its description length, in
//! nats, is the sum of
//!
//! * corpus cost: `-Σ c(m)·ln(c(m)/N)` where `N = Σ c(m)`;
//! * codebook cost: for each morph type, `(len(m) + 1)·ln(A + 1)` for its
//!   characters plus a terminator over an alphabet of `A` symbols, plus
//!   `(2·⌊log2 c(m)⌋ + 1)·ln 2` for an Elias-gamma code of its count.
//!
//! Counts are per word type by default (every type contributes 1 regardless
//! of its corpus frequency); `Dampening::None` uses raw frequencies instead.
//!
//! Training visits word types by descending frequency (ties shuffled by
//! seed), removes the word's current analysis and rebuilds it by greedy
//! recursive binary splitting. The new analysis replaces the old one only if
//! the total cost strictly drops.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Minimum cost improvement for a step to count as a strict decrease.
const STEP_TOLERANCE: f64 = 1e-9;
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("cannot train a segmenter on an empty vocabulary")]
    EmptyVocabulary,
    #[error("unsupported segmentation model version {0}")]
    Version(u32),
    #[error("invalid segmentation model: {0}")]
    Invalid(String),
    #[error("malformed segmentation model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How a word's corpus frequency is turned into the count it contributes to
/// each of its morphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dampening {
    /// Every word type counts once.
    #[default]
    Ones,
    /// Raw token frequency.
    None,
}

impl Dampening {
    fn apply(self, freq: u64) -> u64 {
        match self {
            Dampening::Ones => 1,
            Dampening::None => freq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub convergence_epsilon: f64,
    pub max_passes: usize,
    pub rng_seed: u64,
    pub dampening: Dampening,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            convergence_epsilon: 1e-3,
            max_passes: 10,
            rng_seed: 0,
            dampening: Dampening::Ones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub word: String,
    pub morphemes: Vec<String>,
}

impl Segmentation {
    /// `morph1+morph2+...`
    pub fn joined(&self) -> String {
        self.morphemes.join("+")
    }
}

#[inline]
fn elias_gamma_bits(count: u64) -> u64 {
    debug_assert!(count > 0);
    2 * u64::from(63 - count.leading_zeros()) + 1
}

#[inline]
fn c_ln_c(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        let c = c as f64;
        c * c.ln()
    }
}

/// Incrementally maintained description length of a morph lexicon.
#[derive(Debug, Clone)]
struct MdlState {
    counts: HashMap<String, u64>,
    total: u64,
    sum_c_ln_c: f64,
    codebook_symbols: u64,
    freq_bits: u64,
    symbol_cost: f64,
}

impl MdlState {
    fn new(alphabet_size: usize) -> Self {
        MdlState {
            counts: HashMap::new(),
            total: 0,
            sum_c_ln_c: 0.0,
            codebook_symbols: 0,
            freq_bits: 0,
            symbol_cost: ((alphabet_size + 1) as f64).ln(),
        }
    }

    fn cost(&self) -> f64 {
        let corpus = c_ln_c(self.total) - self.sum_c_ln_c;
        corpus
            + self.symbol_cost * self.codebook_symbols as f64
            + std::f64::consts::LN_2 * self.freq_bits as f64
    }

    fn change(&mut self, morph: &str, delta: i64) {
        let old = self.counts.get(morph).copied().unwrap_or(0);
        let new = (old as i64 + delta) as u64;
        debug_assert!(old as i64 + delta >= 0, "negative morph count for {morph}");
        self.sum_c_ln_c += c_ln_c(new) - c_ln_c(old);
        self.total = (self.total as i64 + delta) as u64;
        let symbols = morph.chars().count() as u64 + 1;
        if old > 0 {
            self.freq_bits -= elias_gamma_bits(old);
            self.codebook_symbols -= symbols;
        }
        if new > 0 {
            self.freq_bits += elias_gamma_bits(new);
            self.codebook_symbols += symbols;
            self.counts.insert(morph.to_owned(), new);
        } else {
            self.counts.remove(morph);
        }
    }

    fn add_all(&mut self, morphs: &[String], freq: u64) {
        for m in morphs {
            self.change(m, freq as i64);
        }
    }

    fn remove_all(&mut self, morphs: &[String], freq: u64) {
        for m in morphs {
            self.change(m, -(freq as i64));
        }
    }

    /// Greedy recursive binary splitting of `s`, which must not currently be
    /// counted for this word. Leaves the chosen morphs added to the state.
    fn split_recursive(&mut self, s: &str, freq: u64) -> Vec<String> {
        let f = freq as i64;
        self.change(s, f);
        let mut best_cost = self.cost();
        self.change(s, -f);
        let mut best_split = None;
        for (pos, _) in s.char_indices().skip(1) {
            let (prefix, suffix) = s.split_at(pos);
            self.change(prefix, f);
            self.change(suffix, f);
            let c = self.cost();
            self.change(prefix, -f);
            self.change(suffix, -f);
            if c < best_cost - TIE_TOLERANCE {
                best_cost = c;
                best_split = Some(pos);
            }
        }
        match best_split {
            None => {
                self.change(s, f);
                vec![s.to_owned()]
            }
            Some(pos) => {
                let (prefix, suffix) = s.split_at(pos);
                // both halves are in place while each one is reconsidered
                self.change(suffix, f);
                let mut left = self.split_recursive(prefix, freq);
                self.change(suffix, -f);
                let right = self.split_recursive(suffix, freq);
                left.extend(right);
                left
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationModel {
    morphs: BTreeMap<String, u64>,
    total_morph_tokens: u64,
    alphabet_size: usize,
    model_cost: f64,
    config: SegmenterConfig,
    cost_trace: Vec<f64>,
    pass_costs: Vec<f64>,
}

pub fn train_segmenter(
    vocab: &Vocabulary,
    config: &SegmenterConfig,
) -> Result<SegmentationModel, MorphError> {
    if vocab.is_empty() {
        return Err(MorphError::EmptyVocabulary);
    }
    let mut alphabet: Vec<char> = vocab
        .entries()
        .iter()
        .flat_map(|(w, _)| w.chars())
        .collect();
    alphabet.sort_unstable();
    alphabet.dedup();

    let mut state = MdlState::new(alphabet.len());
    let mut analyses: HashMap<&str, Vec<String>> = HashMap::with_capacity(vocab.len());
    for (w, f) in vocab.entries() {
        let whole = vec![w.clone()];
        state.add_all(&whole, config.dampening.apply(*f));
        analyses.insert(w.as_str(), whole);
    }

    // vocabulary entries are already sorted by descending count, so ties form runs
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<(&str, u64)> = Vec::with_capacity(vocab.len());
    for run in vocab.entries().chunk_by(|a, b| a.1 == b.1) {
        let mut run: Vec<(&str, u64)> = run
            .iter()
            .map(|(w, f)| (w.as_str(), config.dampening.apply(*f)))
            .collect();
        run.shuffle(&mut rng);
        order.extend(run);
    }

    let mut cost_trace = vec![state.cost()];
    let mut pass_costs = vec![state.cost()];
    for pass in 0..config.max_passes {
        let pass_start = state.cost();
        for &(word, freq) in &order {
            let before = state.cost();
            let old = analyses.remove(word).expect("every word has an analysis");
            state.remove_all(&old, freq);
            let new = state.split_recursive(word, freq);
            let after = state.cost();
            if new != old && after < before - STEP_TOLERANCE {
                cost_trace.push(after);
                analyses.insert(word, new);
            } else {
                state.remove_all(&new, freq);
                state.add_all(&old, freq);
                analyses.insert(word, old);
            }
        }
        let pass_end = state.cost();
        pass_costs.push(pass_end);
        log::debug!("segmenter pass {pass}: cost {pass_start:.3} -> {pass_end:.3}");
        if pass_start - pass_end < config.convergence_epsilon {
            break;
        }
    }

    let morphs: BTreeMap<String, u64> = state.counts.into_iter().collect();
    let mut model = SegmentationModel::from_parts(morphs, config.clone())?;
    model.cost_trace = cost_trace;
    model.pass_costs = pass_costs;
    Ok(model)
}

impl SegmentationModel {
    fn from_parts(
        morphs: BTreeMap<String, u64>,
        config: SegmenterConfig,
    ) -> Result<Self, MorphError> {
        if morphs.is_empty() {
            return Err(MorphError::Invalid("empty morph lexicon".into()));
        }
        if let Some((m, _)) = morphs.iter().find(|(m, c)| m.is_empty() || **c == 0) {
            return Err(MorphError::Invalid(format!(
                "morph {m:?} must be nonempty with a positive count"
            )));
        }
        let mut alphabet: Vec<char> = morphs.keys().flat_map(|m| m.chars()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        let mut state = MdlState::new(alphabet.len());
        for (m, c) in &morphs {
            state.change(m, *c as i64);
        }
        Ok(SegmentationModel {
            total_morph_tokens: state.total,
            model_cost: state.cost(),
            alphabet_size: alphabet.len(),
            morphs,
            config,
            cost_trace: Vec::new(),
            pass_costs: Vec::new(),
        })
    }

    pub fn morph_lexicon(&self) -> &BTreeMap<String, u64> {
        &self.morphs
    }

    pub fn total_morph_tokens(&self) -> u64 {
        self.total_morph_tokens
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Total description length in nats.
    pub fn model_cost(&self) -> f64 {
        self.model_cost
    }

    pub fn config(&self) -> &SegmenterConfig {
        &self.config
    }

    /// Model cost before training followed by the cost after every accepted
    /// step. Empty for a model loaded from disk.
    pub fn cost_trace(&self) -> &[f64] {
        &self.cost_trace
    }

    /// Cost at the start of training and at the end of every pass.
    pub fn pass_costs(&self) -> &[f64] {
        &self.pass_costs
    }

    /// Code length of one occurrence of `morph`; unknown morphs pay for
    /// spelling out every character plus the terminator.
    fn morph_cost(&self, morph: &str) -> f64 {
        let ln_n = (self.total_morph_tokens as f64).ln();
        match self.morphs.get(morph) {
            Some(&c) => ln_n - (c as f64).ln(),
            None => {
                ln_n + (morph.chars().count() + 1) as f64 * ((self.alphabet_size + 1) as f64).ln()
            }
        }
    }

    /// Minimum-cost split of `word`. Ties prefer fewer morphemes, then the
    /// shortest (lexicographically smallest) leading morpheme.
    pub fn segment(&self, word: &str) -> Segmentation {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain([word.len()])
            .collect();
        let n = bounds.len() - 1;
        // best[i] = (cost, morph count, next boundary) for word[bounds[i]..]
        let mut best: Vec<(f64, usize, usize)> = vec![(0.0, 0, n); n + 1];
        for i in (0..n).rev() {
            let mut choice: Option<(f64, usize, usize)> = None;
            for j in i + 1..=n {
                let cost = self.morph_cost(&word[bounds[i]..bounds[j]]) + best[j].0;
                let count = best[j].1 + 1;
                let better = match choice {
                    None => true,
                    Some((bc, bn, _)) => {
                        cost < bc - TIE_TOLERANCE
                            || ((cost - bc).abs() <= TIE_TOLERANCE && count < bn)
                    }
                };
                if better {
                    choice = Some((cost, count, j));
                }
            }
            best[i] = choice.expect("nonempty range");
        }
        let mut morphemes = Vec::with_capacity(best[0].1);
        let mut i = 0;
        while i < n {
            let j = best[i].2;
            morphemes.push(word[bounds[i]..bounds[j]].to_owned());
            i = j;
        }
        Segmentation {
            word: word.to_owned(),
            morphemes,
        }
    }

    /// Leading morpheme of the segmentation.
    pub fn stem(&self, word: &str) -> String {
        self.segment(word)
            .morphemes
            .into_iter()
            .next()
            .unwrap_or_default()
    }

    /// Replaces every token by its morphemes, memoizing per word type.
    pub fn segment_corpus(&self, corpus: &Corpus) -> Corpus {
        let mut cache: HashMap<&str, Vec<String>> = HashMap::new();
        let sentences = corpus.sentences().iter().map(|sentence| {
            let mut out = Vec::with_capacity(sentence.len());
            for tok in sentence {
                let morphs = cache
                    .entry(tok.as_str())
                    .or_insert_with(|| self.segment(tok).morphemes);
                out.extend(morphs.iter().cloned());
            }
            out
        });
        Corpus::from_sentences(sentences.collect::<Vec<_>>())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), MorphError> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            morphemes: self
                .morphs
                .iter()
                .map(|(m, c)| MorphCount {
                    m: m.clone(),
                    count: *c,
                })
                .collect(),
            config: self.config.clone(),
        };
        serde_json::to_writer_pretty(out, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, MorphError> {
        let file: ModelFile = serde_json::from_reader(input)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(MorphError::Version(file.version));
        }
        let mut morphs = BTreeMap::new();
        for MorphCount { m, count } in file.morphemes {
            if morphs.insert(m.clone(), count).is_some() {
                return Err(MorphError::Invalid(format!("duplicate morph {m:?}")));
            }
        }
        SegmentationModel::from_parts(morphs, file.config)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MorphCount {
    m: String,
    count: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    morphemes: Vec<MorphCount>,
    config: SegmenterConfig,
}
