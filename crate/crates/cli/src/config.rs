//! Flat TOML config file. Every key mirrors a command-line flag (dashes
//! become underscores) and a flag given on the command line wins.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Paths.
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub assignments: Option<PathBuf>,
    pub gold: Option<PathBuf>,

    // Preprocessing.
    pub format: Option<String>,
    pub stopwords: Option<PathBuf>,
    pub stem: Option<bool>,
    pub min_df: Option<u32>,

    // Sampling.
    pub algorithm: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kmax: Option<usize>,
    pub kreal: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub entropy_refreshes: Option<usize>,
    pub entropy_eps: Option<f64>,
    pub entropy_norm: Option<bool>,
    pub trace: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// `flag`, else the file value, else an error naming the flag.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Config(format!("--{name} is required (flag or config key)")))
}
