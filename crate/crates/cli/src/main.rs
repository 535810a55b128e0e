use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;

use config::FileConfig;

/// Short-text clustering with GSDMM and GSDMM+.
#[derive(Debug, Parser)]
#[command(name = "gsdmm", version, about)]
struct Cli {
    /// Flat TOML file whose keys mirror the flags; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenize a dataset into a corpus archive directory.
    Preprocess(PreprocessArgs),
    /// Cluster a corpus archive.
    Cluster(ClusterArgs),
    /// Score an assignments file against gold labels (ACC, NMI).
    Eval(EvalArgs),
    /// Print the most probable words of every cluster as TSV.
    Topwords(TopwordsArgs),
    /// Generate a labelled synthetic dataset from the mixture model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Gsdmm,
    #[value(name = "gsdmm+")]
    GsdmmPlus,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Dataset file (JSONL or TSV).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Archive directory to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Stopword list, one word per line, replacing the bundled list.
    #[arg(long, value_name = "PATH")]
    pub stopwords: Option<PathBuf>,
    /// Apply the S-stemmer.
    #[arg(long)]
    pub stem: bool,
    /// Drop words appearing in fewer documents than this.
    #[arg(long)]
    pub min_df: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Archive directory written by `preprocess`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory for assignments.csv, summary.json and traces.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Upper bound on the number of clusters.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Target cluster count for the GSDMM+ merge step.
    #[arg(long)]
    pub kreal: Option<usize>,
    /// Number of Gibbs sweeps.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Entropy table refreshes per sweep (GSDMM+).
    #[arg(long)]
    pub entropy_refreshes: Option<usize>,
    /// Smoothing constant in the word entropy.
    #[arg(long)]
    pub entropy_eps: Option<f64>,
    /// Use raw entropies instead of dividing by ln K.
    #[arg(long)]
    pub no_entropy_norm: bool,
    /// Write trace.csv (and per-sweep ACC / NMI when labels exist).
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// assignments.csv written by `cluster`.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// Gold labels: an archive directory or a labelled dataset file.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Format of `--gold` when it is a dataset file.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Also write the report JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TopwordsArgs {
    /// Output directory of `cluster`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Archive directory; defaults to the one recorded in summary.json.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Words per cluster.
    #[arg(short = 'n', long = "top", default_value_t = 10)]
    pub top: usize,
    /// Write the TSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of mixture components.
    #[arg(long)]
    pub k: usize,
    /// Generator vocabulary size.
    #[arg(long)]
    pub v: usize,
    /// Number of documents.
    #[arg(long)]
    pub d: usize,
    /// Fixed document length.
    #[arg(long, conflicts_with = "mean_len")]
    pub doc_len: Option<u32>,
    /// Mean of a shifted-Poisson document length.
    #[arg(long)]
    pub mean_len: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_gen: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta_gen: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSONL file to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DMM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = FileConfig::load(cli.config.as_deref()).and_then(|file| match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a, &file),
        Command::Cluster(a) => commands::cluster(a, &file),
        Command::Eval(a) => commands::eval(a, &file),
        Command::Topwords(a) => commands::topwords(a, &file),
        Command::Synth(a) => commands::synth(a, &file),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
