use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

/// Values read from `--config`. Every field is optional; a flag given on the
/// command line wins over the file, and the file wins over built-in defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub density: Option<String>,
    pub seed: Option<u64>,
    pub components: Option<usize>,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
    pub pad: Option<usize>,
    pub kernel: Option<String>,
    pub bandwidth: Option<String>,
    pub prominence: Option<f64>,
    pub min_separation: Option<f64>,
    pub reflect: Option<bool>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub lambdas: Option<Vec<f64>>,
    pub lag: Option<f64>,
    pub dt: Option<f64>,
    pub paths: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag, then config file, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
