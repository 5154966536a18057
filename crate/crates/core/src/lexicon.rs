//! Sense-annotated lexicon, its join with embeddings, and class-balanced sampling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierError, TrainedClassifier};
use crate::embedding::EmbeddingModel;
use crate::matrix::Matrix;
use crate::morph::SegmentationModel;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: unknown sense label {label:?}")]
    UnknownSense { line: usize, label: String },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("classes missing from dataset: {}", .0.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "))]
    MissingClasses(Vec<SenseType>),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The seven verbal sense-types, with stable codes 0..=6 in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SenseType {
    KnowKnown,
    MeansEnd,
    BeforeAfter,
    GripGrasp,
    LocusLocated,
    PartWhole,
    WrapWrapped,
}

impl SenseType {
    pub const ALL: [SenseType; 7] = [
        SenseType::KnowKnown,
        SenseType::MeansEnd,
        SenseType::BeforeAfter,
        SenseType::GripGrasp,
        SenseType::LocusLocated,
        SenseType::PartWhole,
        SenseType::WrapWrapped,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<SenseType> {
        SenseType::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SenseType::KnowKnown => "KNOW_KNOWN",
            SenseType::MeansEnd => "MEANS_END",
            SenseType::BeforeAfter => "BEFORE_AFTER",
            SenseType::GripGrasp => "GRIP_GRASP",
            SenseType::LocusLocated => "LOCUS_LOCATED",
            SenseType::PartWhole => "PART_WHOLE",
            SenseType::WrapWrapped => "WRAP_WRAPPED",
        }
    }

    /// Primitive sense, e.g. "to know".
    pub fn gloss(self) -> &'static str {
        match self {
            SenseType::KnowKnown => "to know",
            SenseType::MeansEnd => "to do",
            SenseType::BeforeAfter => "to move",
            SenseType::GripGrasp => "to have",
            SenseType::LocusLocated => "to be",
            SenseType::PartWhole => "to cut",
            SenseType::WrapWrapped => "to bound",
        }
    }
}

impl fmt::Display for SenseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SenseType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SenseType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub primary: SenseType,
    pub secondary: Option<SenseType>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateWord {
    pub word: String,
    /// Line of the repeated occurrence.
    pub line: usize,
    pub first_line: usize,
    /// Whether the primary sense differs from the first occurrence.
    pub conflicting: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub entries: Vec<LexiconEntry>,
    pub duplicates: Vec<DuplicateWord>,
}

impl Lexicon {
    /// Entries with later repeats of a word removed.
    pub fn deduplicated(&self) -> Vec<LexiconEntry> {
        let mut seen = std::collections::HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.word.as_str()))
            .cloned()
            .collect()
    }
}

/// Parses `word<TAB>primary[<TAB>secondary]` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_lexicon<R: BufRead>(input: R) -> Result<Lexicon, LexiconError> {
    let mut lexicon = Lexicon::default();
    let mut first_seen: HashMap<String, (usize, SenseType)> = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(LexiconError::Format {
                line: line_no,
                reason: format!(
                    "expected 2 or 3 tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let word = fields[0].trim();
        if word.is_empty() {
            return Err(LexiconError::Format {
                line: line_no,
                reason: "empty word".into(),
            });
        }
        let parse = |label: &str| {
            label
                .trim()
                .parse::<SenseType>()
                .map_err(|label| LexiconError::UnknownSense {
                    line: line_no,
                    label,
                })
        };
        let primary = parse(fields[1])?;
        let secondary = match fields.get(2) {
            Some(s) if !s.trim().is_empty() => Some(parse(s)?),
            _ => None,
        };
        match first_seen.get(word) {
            Some(&(first_line, first_sense)) => lexicon.duplicates.push(DuplicateWord {
                word: word.to_owned(),
                line: line_no,
                first_line,
                conflicting: first_sense != primary,
            }),
            None => {
                first_seen.insert(word.to_owned(), (line_no, primary));
            }
        }
        lexicon.entries.push(LexiconEntry {
            word: word.to_owned(),
            primary,
            secondary,
        });
    }
    Ok(lexicon)
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LexiconError> {
    read_lexicon(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<SenseType>,
    pub words: Vec<String>,
    pub coverage: f64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label_codes(&self) -> Vec<u8> {
        self.labels.iter().map(|s| s.code()).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<SenseType, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_default() += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Coverage is inherited.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            words: indices.iter().map(|&i| self.words[i].clone()).collect(),
            coverage: self.coverage,
        }
    }

    pub fn missing_classes(&self, required: &[SenseType]) -> Vec<SenseType> {
        let counts = self.class_counts();
        required
            .iter()
            .copied()
            .filter(|s| !counts.contains_key(s))
            .collect()
    }

    /// `word<TAB>SENSE<TAB>c1 ... cd` rows after a `# coverage <c> dim <d>` header.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# coverage {} dim {}", self.coverage, self.dim())?;
        for i in 0..self.len() {
            let comps: Vec<String> = self.features.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(
                out,
                "{}\t{}\t{}",
                self.words[i],
                self.labels[i],
                comps.join(" ")
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, LexiconError> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let bad = |line: usize, reason: String| LexiconError::Format { line, reason };
        let h: Vec<&str> = header.split_whitespace().collect();
        let (coverage, dim) = match h.as_slice() {
            ["#", "coverage", c, "dim", d] => (
                c.parse::<f64>()
                    .map_err(|_| bad(1, "bad coverage".into()))?,
                d.parse::<usize>().map_err(|_| bad(1, "bad dim".into()))?,
            ),
            _ => return Err(bad(1, "expected `# coverage <c> dim <d>` header".into())),
        };
        let (mut words, mut labels, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let (Some(word), Some(label), Some(vec)) =
                (fields.next(), fields.next(), fields.next())
            else {
                return Err(bad(
                    line_no,
                    "expected word, sense and vector fields".into(),
                ));
            };
            let label = label
                .parse::<SenseType>()
                .map_err(|label| LexiconError::UnknownSense {
                    line: line_no,
                    label,
                })?;
            let before = data.len();
            for f in vec.split_whitespace() {
                data.push(
                    f.parse::<f64>()
                        .map_err(|_| bad(line_no, format!("bad component {f:?}")))?,
                );
            }
            if data.len() - before != dim {
                return Err(bad(
                    line_no,
                    format!("expected {dim} components, found {}", data.len() - before),
                ));
            }
            words.push(word.to_owned());
            labels.push(label);
        }
        Ok(LabeledDataset {
            features: Matrix::from_vec(labels.len(), dim, data),
            labels,
            words,
            coverage,
        })
    }

    /// Little-endian binary layout: magic `SPDS`, u32 version, u64 rows, u64 dim,
    /// f64 coverage, then per row u32 word length, word bytes, u8 sense code and
    /// `dim` f64 components.
    pub fn write_bin<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"SPDS")?;
        out.write_all(&1u32.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim() as u64).to_le_bytes())?;
        out.write_all(&self.coverage.to_le_bytes())?;
        for i in 0..self.len() {
            let w = self.words[i].as_bytes();
            out.write_all(&(w.len() as u32).to_le_bytes())?;
            out.write_all(w)?;
            out.write_all(&[self.labels[i].code()])?;
            for v in self.features.row(i) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_bin<R: Read>(mut input: R) -> Result<Self, LexiconError> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], LexiconError> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        let bad = |reason: &str| LexiconError::Format {
            line: 0,
            reason: reason.to_owned(),
        };
        if &take::<4, _>(&mut input)? != b"SPDS" {
            return Err(bad("not a binary dataset (bad magic)"));
        }
        if u32::from_le_bytes(take(&mut input)?) != 1 {
            return Err(bad("unsupported binary dataset version"));
        }
        let n = u64::from_le_bytes(take(&mut input)?) as usize;
        let dim = u64::from_le_bytes(take(&mut input)?) as usize;
        let coverage = f64::from_le_bytes(take(&mut input)?);
        let (mut words, mut labels, mut data) = (Vec::new(), Vec::new(), Vec::new());
        for row in 0..n {
            let len = u32::from_le_bytes(take(&mut input)?) as usize;
            let mut w = vec![0u8; len];
            input.read_exact(&mut w)?;
            words.push(
                String::from_utf8(w).map_err(|_| bad(&format!("row {row}: word is not UTF-8")))?,
            );
            let [code] = take::<1, _>(&mut input)?;
            labels.push(
                SenseType::from_code(code)
                    .ok_or_else(|| bad(&format!("row {row}: bad sense code {code}")))?,
            );
            for _ in 0..dim {
                data.push(f64::from_le_bytes(take(&mut input)?));
            }
        }
        Ok(LabeledDataset {
            features: Matrix::from_vec(n, dim, data),
            labels,
            words,
            coverage,
        })
    }

    /// Chooses binary or TSV by the `.bin` extension.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let out = io::BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_bin(out)
        } else {
            self.write_tsv(out)
        }
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let input = BufReader::new(File::open(path)?);
        if path.extension().is_some_and(|e| e == "bin") {
            Self::read_bin(input)
        } else {
            Self::read_tsv(input)
        }
    }
}

/// How a word was matched to an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedVia {
    Exact,
    Stem,
    Unresolved,
}

impl ResolvedVia {
    pub fn name(self) -> &'static str {
        match self {
            ResolvedVia::Exact => "exact",
            ResolvedVia::Stem => "stem",
            ResolvedVia::Unresolved => "unresolved",
        }
    }
}

/// Exact lookup first, then the stem when a segmenter is available.
pub fn resolve<'a>(
    word: &str,
    embedding: &'a EmbeddingModel,
    morph: Option<&SegmentationModel>,
) -> (ResolvedVia, Option<&'a [f64]>) {
    if let Some(v) = embedding.vector(word) {
        return (ResolvedVia::Exact, Some(v));
    }
    if let Some(model) = morph {
        if let Some(v) = embedding.vector(&model.stem(word)) {
            return (ResolvedVia::Stem, Some(v));
        }
    }
    (ResolvedVia::Unresolved, None)
}

/// Joins entries with embedding rows; unresolvable entries are dropped.
pub fn attach_vectors(
    entries: &[LexiconEntry],
    embedding: &EmbeddingModel,
    morph: Option<&SegmentationModel>,
) -> LabeledDataset {
    let dim = embedding.dim();
    let (mut words, mut labels, mut data) = (Vec::new(), Vec::new(), Vec::new());
    for e in entries {
        if let (_, Some(v)) = resolve(&e.word, embedding, morph) {
            words.push(e.word.clone());
            labels.push(e.primary);
            data.extend_from_slice(v);
        }
    }
    let coverage = if entries.is_empty() {
        0.0
    } else {
        labels.len() as f64 / entries.len() as f64
    };
    LabeledDataset {
        features: Matrix::from_vec(labels.len(), dim, data),
        labels,
        words,
        coverage,
    }
}

/// Row indices of each present class, independently shuffled.
pub fn shuffled_class_indices(
    dataset: &LabeledDataset,
    rng_seed: u64,
) -> BTreeMap<SenseType, Vec<usize>> {
    let mut by_class: BTreeMap<SenseType, Vec<usize>> = BTreeMap::new();
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for indices in by_class.values_mut() {
        indices.shuffle(&mut rng);
    }
    by_class
}

/// Undersamples every present class to the smallest class count. Every class
/// in `required` must be present. Output rows keep their input order.
pub fn balanced_sample(
    dataset: &LabeledDataset,
    required: &[SenseType],
    rng_seed: u64,
) -> Result<LabeledDataset, LexiconError> {
    if dataset.is_empty() {
        return Err(LexiconError::EmptyDataset);
    }
    let missing = dataset.missing_classes(required);
    if !missing.is_empty() {
        return Err(LexiconError::MissingClasses(missing));
    }
    let by_class = shuffled_class_indices(dataset, rng_seed);
    let m = by_class.values().map(Vec::len).min().unwrap_or(0);
    let mut chosen: Vec<usize> = by_class
        .values()
        .flat_map(|idx| idx[..m].iter().copied())
        .collect();
    chosen.sort_unstable();
    Ok(dataset.subset(&chosen))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enrichment {
    pub word: String,
    pub resolved_via: ResolvedVia,
    pub predicted: Option<SenseType>,
    pub confidence: Option<f64>,
}

/// Tags every word with a predicted primary sense. Unresolvable words are
/// kept with no prediction.
pub fn enrich(
    words: &[String],
    classifier: &TrainedClassifier,
    embedding: &EmbeddingModel,
    morph: Option<&SegmentationModel>,
) -> Result<Vec<Enrichment>, LexiconError> {
    if classifier.dim() != embedding.dim() {
        return Err(ClassifierError::DimensionMismatch {
            expected: classifier.dim(),
            found: embedding.dim(),
        }
        .into());
    }
    let resolved: Vec<(ResolvedVia, Option<&[f64]>)> =
        words.iter().map(|w| resolve(w, embedding, morph)).collect();
    let rows: Vec<&[f64]> = resolved.iter().filter_map(|(_, v)| *v).collect();
    let features = Matrix::from_rows(&rows, embedding.dim());
    let confidences = classifier.confidences(&features)?;
    let mut next = 0;
    let mut out = Vec::with_capacity(words.len());
    for (word, (via, v)) in words.iter().zip(resolved) {
        let (predicted, confidence) = if v.is_some() {
            let row = confidences.row(next);
            next += 1;
            let (best, conf) = argmax(row);
            let code = classifier.class_codes()[best];
            let sense = SenseType::from_code(code).ok_or_else(|| {
                ClassifierError::Invalid(format!("class code {code} is not a sense type"))
            })?;
            (Some(sense), Some(conf))
        } else {
            (None, None)
        };
        out.push(Enrichment {
            word: word.clone(),
            resolved_via: via,
            predicted,
            confidence,
        });
    }
    Ok(out)
}

fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    (best, row[best])
}

/// `word<TAB>sense<TAB>confidence<TAB>resolved_via`; unresolved rows leave
/// sense and confidence empty.
pub fn write_enrichment_tsv<W: Write>(rows: &[Enrichment], mut out: W) -> io::Result<()> {
    for r in rows {
        let sense = r.predicted.map(|s| s.name()).unwrap_or("");
        let conf = r.confidence.map(|c| format!("{c:.4}")).unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.word,
            sense,
            conf,
            r.resolved_via.name()
        )?;
    }
    Ok(())
}
