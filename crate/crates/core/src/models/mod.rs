//! Graph classifiers over thread propagation trees.

mod artifact;
mod batch;
mod forward;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

pub use artifact::{load_model, save_model, ModelArtifact};
pub use batch::{gat_neighbourhoods, normalize_adjacency, normalized_entries, GraphBatch};
pub use forward::{forward_batch, forward_with_ids, gat_attention, gat_forward, gcn_forward, pool_graph};
pub use params::{GatHead, GatParams, GcnParams, MlpHead, ModelParams};
pub use train::{predict, predict_proba, train, EpochStats, TrainHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gcn,
    Gat,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Gat => "gat",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "gat" => Ok(ModelKind::Gat),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// How the GCN propagation matrix is formed from the reply tree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// `A[parent][child] = 1`, degrees are row sums.
    #[default]
    Directed,
    /// `A + Aᵀ`.
    Symmetrized,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    /// Attention heads per GAT layer. Concatenating layers use
    /// `hidden_dim / heads` units per head.
    pub heads: usize,
    pub mlp_hidden: usize,
    #[serde(default)]
    pub adjacency: AdjacencyMode,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, input_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            kind,
            input_dim,
            num_classes,
            layers: 2,
            hidden_dim: 64,
            heads: 4,
            mlp_hidden: 32,
            adjacency: AdjacencyMode::Directed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("num_classes", self.num_classes),
            ("layers", self.layers),
            ("hidden_dim", self.hidden_dim),
            ("heads", self.heads),
            ("mlp_hidden", self.mlp_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.kind == ModelKind::Gat && self.layers > 1 && !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: AdamConfig::default(),
            batch_size: 128,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(o.lr > 0.0 && o.lr.is_finite()) || !(o.weight_decay >= 0.0 && o.weight_decay.is_finite()) {
            return Err(Error::Config("learning rate must be positive and weight decay non-negative".into()));
        }
        Ok(())
    }
}
