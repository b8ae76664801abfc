//! TOML pipeline configuration. Every key is optional; command-line flags win.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const SEED_ENV: &str = "THREADFORGE_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub paths: PathsSection,
    pub augment: AugmentSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub raw: Option<PathBuf>,
    pub threads: Option<PathBuf>,
    pub augmented: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub variant: Option<String>,
    pub p_aug: Option<f64>,
    pub fold_cap: Option<u32>,
    pub token_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<String>,
    pub layers: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub heads: Option<usize>,
    pub mlp_hidden: Option<usize>,
    pub adjacency: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub schedule: Option<Vec<f64>>,
    pub hash_dim: Option<usize>,
    pub fallback_hash: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = toml::from_str(&text).map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))?;
        Ok(cfg)
    }
}

/// Flag, then config file, then `THREADFORGE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> anyhow::Result<u64> {
    if let Some(s) = flag.or(file.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV}={v:?} is not an unsigned integer")).into()),
        Err(_) => Ok(0),
    }
}
