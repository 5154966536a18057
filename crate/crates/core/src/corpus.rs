//! Raw text ingestion: codepoint-allowlist normalization, line-oriented corpus
//! loading and frequency vocabularies.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },
    #[error("invalid UTF-8 on line {line} (byte offset {offset} within the line)")]
    DecodeLine { line: usize, offset: usize },
    #[error("malformed vocabulary line {line}: {reason}")]
    VocabFormat { line: usize, reason: String },
    #[error("keep ranges must not be empty")]
    EmptyKeepRanges,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Codepoint allowlist. Everything outside it becomes a token separator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeepRanges(Vec<RangeInclusive<char>>);

impl KeepRanges {
    pub fn new(ranges: Vec<RangeInclusive<char>>) -> Result<Self, CorpusError> {
        if ranges.is_empty() {
            return Err(CorpusError::EmptyKeepRanges);
        }
        Ok(KeepRanges(ranges))
    }

    /// ASCII letters only.
    pub fn ascii_letters() -> Self {
        KeepRanges(vec!['a'..='z', 'A'..='Z'])
    }

    #[inline]
    pub fn contains(&self, c: char) -> bool {
        self.0.iter().any(|r| r.contains(&c))
    }

    pub fn ranges(&self) -> &[RangeInclusive<char>] {
        &self.0
    }
}

impl Default for KeepRanges {
    /// Telugu block U+0C00–U+0C7F plus ASCII letters and digits.
    fn default() -> Self {
        KeepRanges(vec![
            '\u{0C00}'..='\u{0C7F}',
            'a'..='z',
            'A'..='Z',
            '0'..='9',
        ])
    }
}

/// Replaces every codepoint outside `keep` with a space (after NFC) and splits
/// on whitespace.
pub fn normalize_text(raw: &str, keep: &KeepRanges) -> Vec<String> {
    let cleaned: String = raw
        .nfc()
        .map(|c| if keep.contains(c) { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Byte-level entry point; reports the offset of the first invalid sequence.
pub fn normalize_bytes(raw: &[u8], keep: &KeepRanges) -> Result<Vec<String>, CorpusError> {
    let text = std::str::from_utf8(raw).map_err(|e| CorpusError::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize_text(text, keep))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Vec<String>>,
    line_count: usize,
    token_count: usize,
}

impl Corpus {
    /// Builds a corpus from token sequences, dropping empty sentences and empty tokens.
    pub fn from_sentences<I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = Vec<S>>,
        S: Into<String>,
    {
        let mut corpus = Corpus::default();
        for s in sentences {
            corpus.push(
                s.into_iter()
                    .map(Into::into)
                    .filter(|t: &String| !t.is_empty())
                    .collect(),
            );
        }
        corpus
    }

    fn push(&mut self, sentence: Vec<String>) {
        if sentence.is_empty() {
            return;
        }
        self.line_count += 1;
        self.token_count += sentence.len();
        self.sentences.push(sentence);
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn line_count(&self) -> usize {
        self.line_count
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn is_empty(&self) -> bool {
        self.token_count == 0
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Writes one space-joined sentence per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in &self.sentences {
            writeln!(out, "{}", s.join(" "))?;
        }
        Ok(())
    }
}

/// Streaming reader yielding normalized, nonempty sentences one line at a time.
pub struct SentenceReader<R> {
    reader: R,
    keep: KeepRanges,
    line: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> SentenceReader<R> {
    pub fn new(reader: R, keep: KeepRanges) -> Self {
        SentenceReader {
            reader,
            keep,
            line: 0,
            buf: Vec::new(),
        }
    }
}

impl<R: BufRead> Iterator for SentenceReader<R> {
    type Item = Result<Vec<String>, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let text = match std::str::from_utf8(&self.buf) {
                Ok(t) => t,
                Err(e) => {
                    return Some(Err(CorpusError::DecodeLine {
                        line: self.line,
                        offset: e.valid_up_to(),
                    }))
                }
            };
            let tokens = normalize_text(text, &self.keep);
            if !tokens.is_empty() {
                return Some(Ok(tokens));
            }
        }
    }
}

pub fn open_corpus(
    path: &Path,
    keep: &KeepRanges,
) -> Result<SentenceReader<BufReader<File>>, CorpusError> {
    let file = File::open(path)?;
    Ok(SentenceReader::new(BufReader::new(file), keep.clone()))
}

/// Loads a one-sentence-per-line corpus. Lines that normalize to nothing are skipped.
pub fn load_corpus(path: &Path, keep: &KeepRanges) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    for sentence in open_corpus(path, keep)? {
        corpus.push(sentence?);
    }
    Ok(corpus)
}

/// Token frequencies, ordered by descending count then token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, usize>,
    total_count: u64,
}

impl Vocabulary {
    /// Keeps tokens whose count is at least `min_count` (zero counts are always dropped).
    pub fn from_counts<I>(counts: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i))
            .collect();
        let total_count = entries.iter().map(|(_, c)| c).sum();
        Vocabulary {
            entries,
            index,
            total_count,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.index.get(token).map(|&i| self.entries[i].1)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (t, c) in &self.entries {
            writeln!(out, "{t}\t{c}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, CorpusError> {
        let mut counts = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| CorpusError::VocabFormat {
                line: i + 1,
                reason: reason.to_owned(),
            };
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected token<TAB>count"))?;
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(bad("token must be nonempty and whitespace-free"));
            }
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| bad("count is not a nonnegative integer"))?;
            counts.push((tok.to_owned(), count));
        }
        Ok(Vocabulary::from_counts(counts, 1))
    }
}

/// Counts corpus tokens and drops those rarer than `min_count`.
pub fn build_vocabulary(corpus: &Corpus, min_count: u64) -> Vocabulary {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for t in corpus.tokens() {
        *counts.entry(t.to_owned()).or_default() += 1;
    }
    Vocabulary::from_counts(counts, min_count)
}
