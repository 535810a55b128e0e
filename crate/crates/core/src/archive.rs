//! Plain-text persistence: the preprocessed corpus archive and assignment files.
//!
//! An archive is a directory holding
//!
//! * `vocab.tsv`: `id<TAB>word<TAB>doc_freq`, one line per word in id order;
//! * `docs.txt`: `doc_id<TAB>label<TAB>word_id:count ...`, label empty when absent;
//! * `stats.json`: `{"D", "V", "mean_len", "max_len"}`;
//! * `dropped.txt`: ids of documents removed because they became empty.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Document, Vocabulary, WordId};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const DOCS_FILE: &str = "docs.txt";
pub const STATS_FILE: &str = "stats.json";
pub const DROPPED_FILE: &str = "dropped.txt";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io {
        path: path.to_owned(),
        source,
    }
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> ArchiveError {
    ArchiveError::Malformed {
        path: path.to_owned(),
        line,
        reason: reason.into(),
    }
}

fn check_field(path: &Path, line: usize, field: &str) -> Result<(), ArchiveError> {
    if field.contains(['\t', '\n', '\r']) {
        return Err(malformed(
            path,
            line,
            format!("`{field}` contains a tab or newline"),
        ));
    }
    Ok(())
}

pub fn write_archive(dir: &Path, corpus: &Corpus, dropped: &[String]) -> Result<(), ArchiveError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(VOCAB_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    let vocab = corpus.vocabulary();
    for (id, word) in vocab.words().iter().enumerate() {
        writeln!(out, "{id}\t{word}\t{}", vocab.doc_freq(id as WordId)).map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))?;

    let path = dir.join(DOCS_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    for (i, doc) in corpus.documents().iter().enumerate() {
        check_field(&path, i + 1, &doc.doc_id)?;
        let label = doc.gold_label.as_deref().unwrap_or("");
        check_field(&path, i + 1, label)?;
        let pairs: Vec<String> = doc.counts.iter().map(|(w, c)| format!("{w}:{c}")).collect();
        writeln!(out, "{}\t{}\t{}", doc.doc_id, label, pairs.join(" ")).map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))?;

    let path = dir.join(STATS_FILE);
    let stats = serde_json::to_string_pretty(corpus.stats()).expect("stats serialize");
    fs::write(&path, stats + "\n").map_err(io_err(&path))?;

    let path = dir.join(DROPPED_FILE);
    let mut text = String::new();
    for id in dropped {
        text.push_str(id);
        text.push('\n');
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

fn lines(path: &Path) -> Result<Vec<String>, ArchiveError> {
    let file = File::open(path).map_err(io_err(path))?;
    BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))
}

pub fn read_archive(dir: &Path) -> Result<Corpus, ArchiveError> {
    let path = dir.join(VOCAB_FILE);
    let mut entries = Vec::new();
    for (i, line) in lines(&path)?.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, word, df] = cols.as_slice() else {
            return Err(malformed(&path, i + 1, "expected id, word, doc_freq"));
        };
        if id.parse::<usize>().ok() != Some(i) {
            return Err(malformed(
                &path,
                i + 1,
                format!("expected id {i}, found `{id}`"),
            ));
        }
        let df: u32 = df
            .parse()
            .map_err(|_| malformed(&path, i + 1, format!("bad doc_freq `{df}`")))?;
        entries.push((word.to_string(), df));
    }
    let vocab = Vocabulary::from_entries(entries)?;

    let path = dir.join(DOCS_FILE);
    let mut documents = Vec::new();
    for (i, line) in lines(&path)?.iter().enumerate() {
        let mut cols = line.splitn(3, '\t');
        let (Some(doc_id), Some(label), Some(body)) = (cols.next(), cols.next(), cols.next())
        else {
            return Err(malformed(&path, i + 1, "expected doc_id, label, counts"));
        };
        let mut counts: Vec<(WordId, u32)> = Vec::new();
        for pair in body.split_whitespace() {
            let parsed = pair
                .split_once(':')
                .and_then(|(w, c)| Some((w.parse::<WordId>().ok()?, c.parse::<u32>().ok()?)));
            match parsed {
                Some((w, c)) if c > 0 && counts.last().is_none_or(|&(prev, _)| prev < w) => {
                    counts.push((w, c))
                }
                _ => return Err(malformed(&path, i + 1, format!("bad count pair `{pair}`"))),
            }
        }
        if counts.is_empty() {
            return Err(malformed(&path, i + 1, "document has no words"));
        }
        let label = (!label.is_empty()).then(|| label.to_string());
        documents.push(Document::from_counts(doc_id, counts, label));
    }
    Ok(Corpus::new(documents, vocab)?)
}

/// Writes `doc_id,cluster` lines with a header.
pub fn write_assignments<W: Write>(
    mut out: W,
    corpus: &Corpus,
    assignments: &[usize],
) -> io::Result<()> {
    writeln!(out, "doc_id,cluster")?;
    for (doc, z) in corpus.documents().iter().zip(assignments) {
        writeln!(out, "{},{z}", doc.doc_id)?;
    }
    Ok(())
}

/// Reads an assignments file; the cluster is the text after the last comma.
pub fn read_assignments(path: &Path) -> Result<Vec<(String, usize)>, ArchiveError> {
    let mut rows = Vec::new();
    for (i, line) in lines(path)?.iter().enumerate() {
        if i == 0 && line == "doc_id,cluster" {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .rsplit_once(',')
            .and_then(|(id, z)| Some((id.to_string(), z.trim().parse::<usize>().ok()?)));
        match parsed {
            Some(row) => rows.push(row),
            None => return Err(malformed(path, i + 1, "expected `doc_id,cluster`")),
        }
    }
    Ok(rows)
}
