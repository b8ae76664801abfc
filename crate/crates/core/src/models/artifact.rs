use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::{ModelConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::hash;
use crate::nn::{decode_checkpoint, encode_checkpoint, Parameters};

/// JSON sidecar written next to a `CKPT` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model_kind: super::ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub config_hash: String,
    /// Thread ids that fed training, if recorded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_threads: Vec<String>,
}

impl ModelArtifact {
    pub fn new(model: &ModelConfig, train: &TrainConfig) -> Self {
        let canon = serde_json::to_string(&(model, train)).expect("config serializes");
        ModelArtifact {
            model_kind: model.kind,
            input_dim: model.input_dim,
            num_classes: model.num_classes,
            model: model.clone(),
            train: train.clone(),
            config_hash: format!("{:016x}", hash::fnv1a64(canon.as_bytes())),
            training_threads: Vec::new(),
        }
    }
}

fn sidecar_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write `path` (CKPT) and `path.json` (sidecar).
pub fn save_model(path: &Path, params: &ModelParams, artifact: &ModelArtifact) -> Result<()> {
    let named = params.named();
    let bytes = encode_checkpoint(named.iter().map(|(n, t)| (n.as_str(), *t)));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(artifact).expect("sidecar serializes");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub fn load_model(path: &Path) -> Result<(ModelParams, ModelArtifact)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let artifact: ModelArtifact =
        serde_json::from_str(&text).map_err(|e| Error::parse(side.display().to_string(), e))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensors = decode_checkpoint(&bytes)?;
    let mut params = ModelParams::init(&artifact.model, 0)?;
    params.load_named(&tensors)?;
    Ok((params, artifact))
}
