//! Generated fixtures: Gaussian blobs, small classification toys and a
//! synthetic agglutinative language with planted sense classes.

use std::collections::HashSet;
use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::lexicon::{LabeledDataset, LexiconEntry, SenseType};
use crate::matrix::Matrix;

/// `n` points in `dim` dimensions from `n_classes` unit-variance Gaussians.
/// Class `k` is centered at `separation/√2 · e_k`, so any two centers are
/// `separation` apart. Labels cycle 0, 1, ..., so class sizes differ by at
/// most one.
pub fn gaussian_blobs(
    n: usize,
    n_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Matrix, Vec<u8>) {
    assert!(n_classes <= dim, "need one axis per class");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = separation / std::f64::consts::SQRT_2;
    let mut x = Matrix::zeros(n, dim);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % n_classes;
        let row = x.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        row[k] += offset;
        y.push(k as u8);
    }
    (x, y)
}

/// Per-class means of the rows.
pub fn class_centroids(x: &Matrix, y: &[u8]) -> Vec<(u8, Vec<f64>)> {
    let mut codes = y.to_vec();
    codes.sort_unstable();
    codes.dedup();
    codes
        .into_iter()
        .map(|c| {
            let mut sum = vec![0.0; x.cols()];
            let mut n = 0.0;
            for (r, _) in x.iter_rows().zip(y).filter(|(_, &l)| l == c) {
                sum.iter_mut().zip(r).for_each(|(s, v)| *s += v);
                n += 1.0;
            }
            sum.iter_mut().for_each(|s| *s /= n);
            (c, sum)
        })
        .collect()
}

/// Training accuracy of assigning each row to its nearest class centroid.
pub fn nearest_centroid_accuracy(x: &Matrix, y: &[u8]) -> f64 {
    let centroids = class_centroids(x, y);
    let correct = x
        .iter_rows()
        .zip(y)
        .filter(|(r, &l)| {
            let best = centroids
                .iter()
                .min_by(|a, b| {
                    crate::matrix::squared_distance(&a.1, r)
                        .total_cmp(&crate::matrix::squared_distance(&b.1, r))
                })
                .map(|c| c.0);
            best == Some(l)
        })
        .count();
    correct as f64 / y.len() as f64
}

/// The four XOR corners; label 1 where the coordinates agree.
pub fn xor_fixture() -> (Matrix, Vec<u8>) {
    (
        Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]], 2),
        vec![1, 1, 0, 0],
    )
}

/// Uniform points in [-1, 1]² labeled by the side of the line
/// `x0 + 0.5 x1 = 0`, each label flipped with probability `noise`.
pub fn noisy_binary(n: usize, noise: f64, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        x.row_mut(i).copy_from_slice(&[a, b]);
        let mut label = a + 0.5 * b > 0.0;
        if rng.random_bool(noise) {
            label = !label;
        }
        y.push(u8::from(label));
    }
    (x, y)
}

/// Seven well-separated blobs, one per sense type, as a labeled dataset.
pub fn sense_blobs(per_class: usize, dim: usize, separation: f64, seed: u64) -> LabeledDataset {
    let (features, codes) = gaussian_blobs(per_class * 7, 7, dim, separation, seed);
    LabeledDataset {
        features,
        labels: codes
            .iter()
            .map(|&c| SenseType::from_code(c).expect("code < 7"))
            .collect(),
        words: (0..per_class * 7).map(|i| format!("w{i}")).collect(),
        coverage: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguageConfig {
    pub roots: usize,
    pub suffixes: usize,
    pub target_tokens: usize,
    pub sentence_len: usize,
    /// Context words reserved for each sense class.
    pub class_words: usize,
    /// Context words shared by all classes.
    pub shared_words: usize,
    /// Chance that a context slot draws from the sentence's class words.
    pub class_context_rate: f64,
    /// Chance that a sentence uses a bare root instead of an inflected form.
    pub bare_root_rate: f64,
    /// Zipf exponent for root and suffix frequencies.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        LanguageConfig {
            roots: 40,
            suffixes: 12,
            target_tokens: 200_000,
            sentence_len: 8,
            class_words: 20,
            shared_words: 200,
            class_context_rate: 0.15,
            bare_root_rate: 0.15,
            zipf_exponent: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLanguage {
    pub roots: Vec<(String, SenseType)>,
    pub suffixes: Vec<String>,
    pub corpus: Corpus,
    /// Every root+suffix form, labeled with its root's sense.
    pub lexicon: Vec<LexiconEntry>,
}

const CONSONANTS: &[u8] = b"kgcjtdnpbmyrlvsh";
const VOWELS: &[u8] = b"aeiou";

fn syllables(rng: &mut impl Rng, n: usize) -> String {
    let mut s = String::new();
    for _ in 0..n {
        s.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        s.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    s
}

fn fresh(rng: &mut impl Rng, used: &mut HashSet<String>, n_syllables: usize) -> String {
    loop {
        let w = syllables(rng, n_syllables);
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn zipf(n: usize, exponent: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| (r as f64).powf(-exponent))).expect("positive weights")
}

/// Generates a language of `roots × suffixes` inflected forms. Roots are
/// assigned to the seven senses round-robin; each sentence holds one
/// inflected form (or, sometimes, a bare root) among context words, a share
/// of which come from the root's sense-specific pool.
pub fn generate_language(config: &LanguageConfig) -> SyntheticLanguage {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut used = HashSet::new();
    let suffixes: Vec<String> = (0..config.suffixes)
        .map(|_| fresh(&mut rng, &mut used, 1))
        .collect();
    let roots: Vec<(String, SenseType)> = (0..config.roots)
        .map(|i| (fresh(&mut rng, &mut used, 3), SenseType::ALL[i % 7]))
        .collect();
    let mut forms = HashSet::new();
    for (r, _) in &roots {
        for s in &suffixes {
            forms.insert(format!("{r}{s}"));
        }
    }
    used.extend(forms);
    let class_words: Vec<Vec<String>> = (0..7)
        .map(|_| {
            (0..config.class_words)
                .map(|_| fresh(&mut rng, &mut used, 2))
                .collect()
        })
        .collect();
    let shared: Vec<String> = (0..config.shared_words)
        .map(|_| fresh(&mut rng, &mut used, 2))
        .collect();

    let mut root_order: Vec<usize> = (0..roots.len()).collect();
    root_order.shuffle(&mut rng);
    let root_dist = zipf(roots.len(), config.zipf_exponent);
    let suffix_dist = zipf(suffixes.len(), config.zipf_exponent);
    let shared_dist = zipf(shared.len().max(1), config.zipf_exponent);

    let n_sentences = config.target_tokens.div_ceil(config.sentence_len.max(1));
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let (root, sense) = &roots[root_order[root_dist.sample(&mut rng)]];
        let form = if rng.random_bool(config.bare_root_rate) {
            root.clone()
        } else {
            format!("{root}{}", suffixes[suffix_dist.sample(&mut rng)])
        };
        let pool = &class_words[sense.code() as usize];
        let pos = rng.random_range(0..config.sentence_len.max(1));
        let sentence: Vec<String> = (0..config.sentence_len.max(1))
            .map(|i| {
                if i == pos {
                    form.clone()
                } else if shared.is_empty() || rng.random_bool(config.class_context_rate) {
                    pool[rng.random_range(0..pool.len())].clone()
                } else {
                    shared[shared_dist.sample(&mut rng)].clone()
                }
            })
            .collect();
        sentences.push(sentence);
    }
    let lexicon = roots
        .iter()
        .flat_map(|(r, sense)| {
            suffixes.iter().map(move |s| LexiconEntry {
                word: format!("{r}{s}"),
                primary: *sense,
                secondary: None,
            })
        })
        .collect();
    SyntheticLanguage {
        roots,
        suffixes,
        corpus: Corpus::from_sentences(sentences),
        lexicon,
    }
}

impl SyntheticLanguage {
    pub fn write_lexicon<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.lexicon {
            writeln!(out, "{}\t{}", e.word, e.primary.name())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_centers_are_separation_apart() {
        let (x, y) = gaussian_blobs(3000, 3, 10, 10.0, 1);
        let c = class_centroids(&x, &y);
        let d = crate::matrix::squared_distance(&c[0].1, &c[1].1).sqrt();
        assert!((d - 10.0).abs() < 0.3, "{d}");
        assert!(nearest_centroid_accuracy(&x, &y) > 0.99);
    }

    #[test]
    fn language_shape() {
        let lang = generate_language(&LanguageConfig {
            target_tokens: 8_000,
            ..Default::default()
        });
        assert_eq!(lang.lexicon.len(), 480);
        assert_eq!(lang.corpus.token_count(), 8_000);
        let forms: HashSet<_> = lang.lexicon.iter().map(|e| &e.word).collect();
        assert_eq!(forms.len(), 480);
        for sentence in lang.corpus.sentences() {
            let roots: HashSet<_> = lang.roots.iter().map(|r| &r.0).collect();
            assert_eq!(
                sentence
                    .iter()
                    .filter(|t| forms.contains(t) || roots.contains(t))
                    .count(),
                1
            );
        }
    }
}
