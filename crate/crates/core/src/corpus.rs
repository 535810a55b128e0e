//! Dataset ingestion, text normalization and the in-memory corpus.
//!
//! A [`Corpus`] is immutable once built. Word ids are contiguous and are
//! assigned in order of first appearance while scanning the documents in
//! input order, so rebuilding from the same input gives the same ids.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

/// Index of a word in the [`Vocabulary`].
pub type WordId = u32;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("every document is empty after filtering")]
    AllDocumentsEmpty,
    #[error("invalid token rules: {0}")]
    InvalidRules(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

/// Input file layout accepted by [`read_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One JSON object per line: `{"id", "text", "label"?}`.
    Jsonl,
    /// `id<TAB>label<TAB>text` or `id<TAB>text`.
    Tsv,
}

/// One unprocessed input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDoc {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
}

impl RawDoc {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<&str>) -> Self {
        RawDoc {
            id: id.into(),
            text: text.into(),
            label: label.map(str::to_owned),
        }
    }
}

/// Normalization pipeline settings.
#[derive(Debug, Clone)]
pub struct TokenRules {
    pub lowercase: bool,
    /// Keep only ASCII letters; otherwise any Unicode alphabetic character is kept.
    pub strip_non_latin: bool,
    pub stopwords: HashSet<String>,
    pub stemming: bool,
    pub min_word_len: usize,
    pub max_word_len: usize,
    pub min_df: u32,
}

impl Default for TokenRules {
    fn default() -> Self {
        TokenRules {
            lowercase: true,
            strip_non_latin: true,
            stopwords: default_stopwords(),
            stemming: false,
            min_word_len: 2,
            max_word_len: 15,
            min_df: 2,
        }
    }
}

impl TokenRules {
    /// Rules that keep every alphabetic token: no stopwords, no df cut.
    pub fn permissive() -> Self {
        TokenRules {
            stopwords: HashSet::new(),
            min_word_len: 1,
            max_word_len: usize::MAX,
            min_df: 1,
            ..TokenRules::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_word_len < 1 || self.min_word_len > self.max_word_len {
            return Err(CorpusError::InvalidRules(format!(
                "word length bounds [{}, {}] are empty",
                self.min_word_len, self.max_word_len
            )));
        }
        if self.min_df < 1 {
            return Err(CorpusError::InvalidRules(
                "min_df must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The bundled English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Reads a UTF-8 stopword file with one word per line.
pub fn read_stopwords(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(parse_stopwords(&text))
}

/// Plural-stripping suffix stemmer (Harman's "S" stemmer).
pub fn stem(word: &str) -> String {
    if let Some(base) = word.strip_suffix("ies") {
        if !base.ends_with('e') && !base.ends_with('a') {
            return format!("{base}y");
        }
    }
    if let Some(base) = word.strip_suffix("es") {
        if !(base.ends_with('a') || base.ends_with('e') || base.ends_with('o')) {
            return format!("{base}e");
        }
    }
    if let Some(base) = word.strip_suffix('s') {
        if !(base.ends_with('u') || base.ends_with('s')) {
            return base.to_owned();
        }
    }
    word.to_owned()
}

/// Runs the per-document normalization pipeline.
///
/// Order: lowercase, split on non-letters, stopword removal, stemming,
/// length filter. Document-frequency filtering happens in [`build_corpus`].
pub fn tokenize(text: &str, rules: &TokenRules) -> Vec<String> {
    let text = if rules.lowercase {
        text.to_lowercase()
    } else {
        text.to_owned()
    };
    let keep = |c: char| {
        if rules.strip_non_latin {
            c.is_ascii_alphabetic()
        } else {
            c.is_alphabetic()
        }
    };
    text.split(|c: char| !keep(c))
        .filter(|t| !t.is_empty())
        .filter(|t| !rules.stopwords.contains(*t))
        .map(|t| {
            if rules.stemming {
                stem(t)
            } else {
                t.to_owned()
            }
        })
        .filter(|t| {
            let len = t.chars().count();
            len >= rules.min_word_len && len <= rules.max_word_len
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, WordId>,
    id_to_word: Vec<String>,
    doc_freq: Vec<u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, doc_freq)` pairs listed in id order.
    pub fn from_entries<I, S>(entries: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for (word, df) in entries {
            let word = word.into();
            if vocab.word_to_id.contains_key(&word) {
                return Err(CorpusError::MalformedRecord {
                    line: vocab.id_to_word.len() + 1,
                    reason: format!("word `{word}` listed twice"),
                });
            }
            vocab.push(word, df);
        }
        Ok(vocab)
    }

    fn push(&mut self, word: String, df: u32) -> WordId {
        let id = self.id_to_word.len() as WordId;
        self.word_to_id.insert(word.clone(), id);
        self.id_to_word.push(word);
        self.doc_freq.push(df);
        id
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.id_to_word[id as usize]
    }

    pub fn doc_freq(&self, id: WordId) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }
}

/// A bag-of-words document. `counts` is sorted by word id with no zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub counts: Vec<(WordId, u32)>,
    pub total_len: u32,
    pub gold_label: Option<String>,
}

impl Document {
    /// Collects word occurrences into a sorted count vector.
    pub fn from_word_ids<I>(doc_id: impl Into<String>, ids: I, gold_label: Option<String>) -> Self
    where
        I: IntoIterator<Item = WordId>,
    {
        let mut ids: Vec<WordId> = ids.into_iter().collect();
        ids.sort_unstable();
        let mut counts: Vec<(WordId, u32)> = Vec::new();
        for w in ids {
            match counts.last_mut() {
                Some((last, c)) if *last == w => *c += 1,
                _ => counts.push((w, 1)),
            }
        }
        Document::from_counts(doc_id, counts, gold_label)
    }

    /// `counts` must be sorted by word id, unique and strictly positive.
    pub fn from_counts(
        doc_id: impl Into<String>,
        counts: Vec<(WordId, u32)>,
        gold_label: Option<String>,
    ) -> Self {
        debug_assert!(counts.windows(2).all(|p| p[0].0 < p[1].0));
        debug_assert!(counts.iter().all(|&(_, c)| c > 0));
        let total_len = counts.iter().map(|&(_, c)| c).sum();
        Document {
            doc_id: doc_id.into(),
            counts,
            total_len,
            gold_label,
        }
    }

    pub fn count(&self, w: WordId) -> u32 {
        self.counts
            .binary_search_by_key(&w, |&(id, _)| id)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct CorpusStats {
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "V")]
    pub v: usize,
    pub mean_len: f64,
    pub max_len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
    stats: CorpusStats,
}

impl Corpus {
    /// Assembles a corpus, checking that every word id is in range.
    pub fn new(documents: Vec<Document>, vocabulary: Vocabulary) -> Result<Self, CorpusError> {
        let v = vocabulary.len();
        for (i, doc) in documents.iter().enumerate() {
            if let Some(&(w, _)) = doc.counts.iter().find(|&&(w, _)| w as usize >= v) {
                return Err(CorpusError::MalformedRecord {
                    line: i + 1,
                    reason: format!("word id {w} out of range for vocabulary of size {v}"),
                });
            }
        }
        Ok(Corpus::from_parts(documents, vocabulary))
    }

    pub(crate) fn from_parts(documents: Vec<Document>, vocabulary: Vocabulary) -> Self {
        let d = documents.len();
        let total: u64 = documents.iter().map(|doc| doc.total_len as u64).sum();
        let stats = CorpusStats {
            d,
            v: vocabulary.len(),
            mean_len: if d > 0 { total as f64 / d as f64 } else { 0.0 },
            max_len: documents.iter().map(|doc| doc.total_len).max().unwrap_or(0),
        };
        Corpus {
            documents,
            vocabulary,
            stats,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// Gold labels in document order; `None` if any document is unlabeled.
    pub fn gold_labels(&self) -> Option<Vec<&str>> {
        self.documents
            .iter()
            .map(|d| d.gold_label.as_deref())
            .collect()
    }
}

/// Result of [`build_corpus`]: the corpus plus ids of documents dropped
/// because nothing survived filtering.
#[derive(Debug, Clone)]
pub struct CorpusBuild {
    pub corpus: Corpus,
    pub dropped: Vec<String>,
}

/// Tokenizes, applies the document-frequency cut and assigns word ids.
pub fn build_corpus(raw_docs: &[RawDoc], rules: &TokenRules) -> Result<CorpusBuild, CorpusError> {
    rules.validate()?;
    let mut seen = HashSet::with_capacity(raw_docs.len());
    for doc in raw_docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(CorpusError::DuplicateDocId(doc.id.clone()));
        }
    }

    let tokenized: Vec<Vec<String>> = raw_docs.iter().map(|d| tokenize(&d.text, rules)).collect();
    let build = assemble(raw_docs, &tokenized, rules.min_df);
    if build.corpus.is_empty() {
        return Err(CorpusError::AllDocumentsEmpty);
    }
    Ok(build)
}

/// Shared tail of corpus construction; never fails, may yield D = 0.
pub(crate) fn assemble(raw_docs: &[RawDoc], tokenized: &[Vec<String>], min_df: u32) -> CorpusBuild {
    let mut df: HashMap<&str, u32> = HashMap::new();
    for tokens in tokenized {
        let unique: HashSet<&str> = tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }

    let mut vocabulary = Vocabulary::default();
    let mut documents = Vec::with_capacity(raw_docs.len());
    let mut dropped = Vec::new();
    for (raw, tokens) in raw_docs.iter().zip(tokenized) {
        let mut ids = Vec::with_capacity(tokens.len());
        for t in tokens {
            let f = df[t.as_str()];
            if f < min_df {
                continue;
            }
            let id = match vocabulary.id(t) {
                Some(id) => id,
                None => vocabulary.push(t.clone(), f),
            };
            ids.push(id);
        }
        if ids.is_empty() {
            dropped.push(raw.id.clone());
        } else {
            documents.push(Document::from_word_ids(
                raw.id.clone(),
                ids,
                raw.label.clone(),
            ));
        }
    }

    CorpusBuild {
        corpus: Corpus::from_parts(documents, vocabulary),
        dropped,
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    text: String,
    #[serde(default)]
    label: Option<String>,
}

/// Loads raw records in file order. Blank lines are skipped.
pub fn read_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<RawDoc>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 1, format)?);
    }
    Ok(records)
}

fn parse_record(line: &str, line_no: usize, format: DatasetFormat) -> Result<RawDoc, CorpusError> {
    match format {
        DatasetFormat::Jsonl => {
            let rec: JsonRecord =
                serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            Ok(RawDoc {
                id: rec.id,
                text: rec.text,
                label: rec.label,
            })
        }
        DatasetFormat::Tsv => {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                [id, text] => Ok(RawDoc::new(*id, *text, None)),
                [id, label, text] => Ok(RawDoc::new(*id, *text, Some(label))),
                _ => Err(CorpusError::MalformedRecord {
                    line: line_no,
                    reason: format!(
                        "expected 2 or 3 tab-separated columns, found {}",
                        cols.len()
                    ),
                }),
            }
        }
    }
}
