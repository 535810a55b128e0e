use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use gsdmm::archive::{
    read_archive, read_assignments, write_archive, write_assignments, ArchiveError,
};
use gsdmm::corpus::{read_stopwords, CorpusError};
use gsdmm::eval::{evaluate, LabeledPartitionPair};
use gsdmm::model::top_words;
use gsdmm::sampler::{RunNote, SamplerError};
use gsdmm::synth::{generate_corpus, DocLength, GenSpec};
use gsdmm::{
    build_corpus, read_dataset, Algorithm, DatasetFormat, ModelState, RunConfig, TokenRules,
};
use serde::{Deserialize, Serialize};

use crate::config::{required, FileConfig};
use crate::error::CliError;
use crate::{
    AlgorithmArg, ClusterArgs, EvalArgs, FormatArg, PreprocessArgs, SynthArgs, TopwordsArgs,
};

pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const MERGE_LOG_FILE: &str = "merge_log.csv";

/// Contents of `summary.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub k_final: usize,
    pub iterations: usize,
    pub seed: u64,
    pub wall_time_ms: u64,
    pub alpha: f64,
    pub beta: f64,
    pub k_max: usize,
    pub k_real: Option<usize>,
    pub entropy_refreshes_per_sweep: usize,
    pub entropy_epsilon: f64,
    pub entropy_normalized: bool,
    pub documents: usize,
    pub corpus: PathBuf,
    pub notes: Vec<String>,
}

fn parse_enum<T: ValueEnum>(value: &str, key: &str) -> Result<T, CliError> {
    T::from_str(value, true)
        .map_err(|_| CliError::Config(format!("invalid {key} `{value}` in config file")))
}

fn dataset_format(flag: Option<FormatArg>, file: &FileConfig) -> Result<DatasetFormat, CliError> {
    let arg = match (flag, &file.format) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_enum(s, "format")?,
        (None, None) => FormatArg::Jsonl,
    };
    Ok(match arg {
        FormatArg::Jsonl => DatasetFormat::Jsonl,
        FormatArg::Tsv => DatasetFormat::Tsv,
    })
}

fn corpus_input_error(e: CorpusError) -> CliError {
    CliError::Input(e.to_string())
}

fn archive_input_error(e: ArchiveError) -> CliError {
    CliError::Input(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(CliError::io(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(CliError::io(path))?,
    ))
}

pub fn preprocess(args: &PreprocessArgs, file: &FileConfig) -> Result<(), CliError> {
    let input = required(args.input.clone(), file.input.clone(), "input")?;
    let output = required(args.output.clone(), file.output.clone(), "output")?;
    let format = dataset_format(args.format, file)?;

    let mut rules = TokenRules {
        stemming: args.stem || file.stem.unwrap_or(false),
        ..TokenRules::default()
    };
    if let Some(min_df) = args.min_df.or(file.min_df) {
        rules.min_df = min_df;
    }
    if let Some(path) = args.stopwords.as_ref().or(file.stopwords.as_ref()) {
        rules.stopwords = read_stopwords(path).map_err(corpus_input_error)?;
    }
    rules
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let raw = read_dataset(&input, format).map_err(corpus_input_error)?;
    let built = build_corpus(&raw, &rules).map_err(corpus_input_error)?;
    if !built.dropped.is_empty() {
        log::info!(
            "{} document(s) became empty and were dropped",
            built.dropped.len()
        );
    }
    write_archive(&output, &built.corpus, &built.dropped)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let stats = serde_json::to_string(built.corpus.stats())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{stats}");
    Ok(())
}

fn run_config(args: &ClusterArgs, file: &FileConfig) -> Result<RunConfig, CliError> {
    let algorithm = match (args.algorithm, &file.algorithm) {
        (Some(a), _) => a,
        (None, Some(s)) => parse_enum(s, "algorithm")?,
        (None, None) => AlgorithmArg::Gsdmm,
    };
    let mut cfg = RunConfig::defaults_for(match algorithm {
        AlgorithmArg::Gsdmm => Algorithm::Gsdmm,
        AlgorithmArg::GsdmmPlus => Algorithm::GsdmmPlus,
    });
    if let Some(x) = args.alpha.or(file.alpha) {
        cfg.alpha = x;
    }
    if let Some(x) = args.beta.or(file.beta) {
        cfg.beta = x;
    }
    if let Some(x) = args.kmax.or(file.kmax) {
        cfg.k_max = x;
    }
    cfg.k_real = args.kreal.or(file.kreal);
    if let Some(x) = args.iters.or(file.iters) {
        cfg.iterations = x;
    }
    if let Some(x) = args.seed.or(file.seed) {
        cfg.seed = x;
    }
    if let Some(x) = args.entropy_refreshes.or(file.entropy_refreshes) {
        cfg.entropy_refreshes_per_sweep = x;
    }
    if let Some(x) = args.entropy_eps.or(file.entropy_eps) {
        cfg.entropy_epsilon = x;
    }
    cfg.entropy_normalized = !args.no_entropy_norm && file.entropy_norm.unwrap_or(true);
    cfg.trace_metrics = args.trace || file.trace.unwrap_or(false);
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Gsdmm => "gsdmm",
        Algorithm::GsdmmPlus => "gsdmm+",
    }
}

pub fn cluster(args: &ClusterArgs, file: &FileConfig) -> Result<(), CliError> {
    let corpus_dir = required(args.corpus.clone(), file.corpus.clone(), "corpus")?;
    let output = required(args.output.clone(), file.output.clone(), "output")?;
    let cfg = run_config(args, file)?;
    let corpus = read_archive(&corpus_dir).map_err(archive_input_error)?;

    let start = Instant::now();
    let out = gsdmm::run(&corpus, &cfg).map_err(|e| match e {
        SamplerError::Config(_) | SamplerError::KMaxExceedsCorpus { .. } => {
            CliError::Config(e.to_string())
        }
        SamplerError::EmptyCorpus => CliError::Input(e.to_string()),
        other => CliError::Internal(other.to_string()),
    })?;
    let wall_time_ms = start.elapsed().as_millis() as u64;

    fs::create_dir_all(&output).map_err(CliError::io(&output))?;
    let path = output.join(ASSIGNMENTS_FILE);
    let mut w = create(&path)?;
    write_assignments(&mut w, &corpus, &out.assignments)
        .and_then(|_| w.flush())
        .map_err(CliError::io(&path))?;

    if cfg.trace_metrics {
        let path = output.join(TRACE_FILE);
        let mut w = create(&path)?;
        out.trace
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(CliError::io(&path))?;
    }
    if cfg.algorithm == Algorithm::GsdmmPlus {
        let path = output.join(MERGE_LOG_FILE);
        let mut w = create(&path)?;
        out.merge_log
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(CliError::io(&path))?;
    }

    let notes = out
        .notes
        .iter()
        .map(|n| match n {
            RunNote::KRealExceedsActive { k_real, k_active } => {
                eprintln!("warning: k_real = {k_real} exceeds the {k_active} clusters left after sampling; merge skipped");
                format!("k_real {k_real} exceeds active clusters {k_active}; merge skipped")
            }
        })
        .collect();
    let summary = Summary {
        algorithm: algorithm_name(cfg.algorithm).to_string(),
        k_final: out.state.k_active(),
        iterations: cfg.iterations,
        seed: cfg.seed,
        wall_time_ms,
        alpha: cfg.alpha,
        beta: cfg.beta,
        k_max: cfg.k_max,
        k_real: cfg.k_real,
        entropy_refreshes_per_sweep: cfg.entropy_refreshes_per_sweep,
        entropy_epsilon: cfg.entropy_epsilon,
        entropy_normalized: cfg.entropy_normalized,
        documents: corpus.len(),
        corpus: fs::canonicalize(&corpus_dir).unwrap_or(corpus_dir),
        notes,
    };
    write_json(&output.join(SUMMARY_FILE), &summary)?;
    println!(
        "{}: {} clusters over {} documents in {} ms",
        summary.algorithm, summary.k_final, summary.documents, summary.wall_time_ms
    );
    Ok(())
}

/// doc_id → gold label, from an archive directory or a dataset file.
fn gold_labels(
    path: &Path,
    format: DatasetFormat,
) -> Result<HashMap<String, Option<String>>, CliError> {
    if path.is_dir() {
        let corpus = read_archive(path).map_err(archive_input_error)?;
        Ok(corpus
            .documents()
            .iter()
            .map(|d| (d.doc_id.clone(), d.gold_label.clone()))
            .collect())
    } else {
        let raw = read_dataset(path, format).map_err(corpus_input_error)?;
        Ok(raw.into_iter().map(|r| (r.id, r.label)).collect())
    }
}

pub fn eval(args: &EvalArgs, file: &FileConfig) -> Result<(), CliError> {
    let assignments = required(
        args.assignments.clone(),
        file.assignments.clone(),
        "assignments",
    )?;
    let gold_path = required(args.gold.clone(), file.gold.clone(), "gold")?;
    let format = dataset_format(args.format, file)?;

    let rows = read_assignments(&assignments).map_err(archive_input_error)?;
    if rows.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no assignments",
            assignments.display()
        )));
    }
    let gold = gold_labels(&gold_path, format)?;

    let mut pred = Vec::with_capacity(rows.len());
    let mut truth = Vec::with_capacity(rows.len());
    let mut unmatched = Vec::new();
    for (id, z) in &rows {
        match gold.get(id) {
            Some(Some(label)) => {
                pred.push(*z);
                truth.push(label.as_str());
            }
            _ => unmatched.push(id.as_str()),
        }
    }
    if let Some(first) = unmatched.first() {
        return Err(CliError::Unmatched {
            first: first.to_string(),
            count: unmatched.len(),
        });
    }

    let pair = LabeledPartitionPair::from_labels(&pred, &truth)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let report = evaluate(&pair);
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{text}");
    if let Some(path) = args.output.as_ref() {
        write_json(path, &report)?;
    }
    Ok(())
}

fn missing(path: &Path, reason: impl ToString) -> CliError {
    CliError::MissingArtifact {
        path: path.to_owned(),
        reason: reason.to_string(),
    }
}

pub fn topwords(args: &TopwordsArgs, file: &FileConfig) -> Result<(), CliError> {
    let model = required(args.model.clone(), file.model.clone(), "model")?;
    if args.top == 0 {
        return Err(CliError::Config("--top must be at least 1".into()));
    }

    let summary_path = model.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).map_err(|e| missing(&summary_path, e))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| missing(&summary_path, e))?;
    let corpus_dir = args
        .corpus
        .clone()
        .or(file.corpus.clone())
        .unwrap_or(summary.corpus);
    let corpus = read_archive(&corpus_dir).map_err(|e| missing(&corpus_dir, e))?;

    let assignments_path = model.join(ASSIGNMENTS_FILE);
    let rows: HashMap<String, usize> = read_assignments(&assignments_path)
        .map_err(|e| missing(&assignments_path, e))?
        .into_iter()
        .collect();
    let assignment = corpus
        .documents()
        .iter()
        .map(|d| {
            rows.get(&d.doc_id).copied().ok_or_else(|| {
                missing(
                    &assignments_path,
                    format!("no cluster for document `{}`", d.doc_id),
                )
            })
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let k = assignment.iter().max().map_or(0, |&z| z + 1);
    let state = ModelState::from_assignments(&corpus, &assignment, k, summary.alpha)
        .map_err(|e| missing(&assignments_path, e))?;

    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let dest = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut emit = || -> io::Result<()> {
        writeln!(out, "cluster\trank\tword\tphi")?;
        for z in 0..k {
            if state.clusters()[z].is_empty() {
                continue;
            }
            let words = top_words(&state, corpus.vocabulary(), z, args.top, summary.beta)
                .map_err(|e| io::Error::other(e.to_string()))?;
            for (rank, (word, phi)) in words.iter().enumerate() {
                writeln!(out, "{z}\t{}\t{word}\t{phi:.6}", rank + 1)?;
            }
        }
        out.flush()
    };
    emit().map_err(CliError::io(dest))
}

pub fn synth(args: &SynthArgs, file: &FileConfig) -> Result<(), CliError> {
    let output = required(args.output.clone(), file.output.clone(), "output")?;
    let doc_len = match (args.doc_len, args.mean_len) {
        (Some(n), _) => DocLength::Fixed(n),
        (None, Some(mean)) => DocLength::ShiftedPoisson { mean },
        (None, None) => DocLength::Fixed(8),
    };
    let spec = GenSpec {
        k: args.k,
        v: args.v,
        d: args.d,
        doc_len,
        alpha_gen: args.alpha_gen,
        beta_gen: args.beta_gen,
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    let syn = generate_corpus(&spec).map_err(|e| CliError::Input(e.to_string()))?;
    syn.write_jsonl(&output).map_err(CliError::io(&output))?;

    let mut sizes = vec![0usize; spec.k];
    for &z in &syn.labels {
        sizes[z] += 1;
    }
    println!("component\ttheta\tdocuments");
    for (z, (theta, n)) in syn.theta.iter().zip(&sizes).enumerate() {
        println!("{}\t{theta:.6}\t{n}", gsdmm::synth::topic_label(z));
    }
    Ok(())
}
