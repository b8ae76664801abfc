//! Rumour detection on reply-tree threads: ingestion of PHEME-style
//! archives, tweet normalization, node features, multifold oversampling,
//! GCN/GAT classifiers on a small reverse-mode autodiff core, and
//! leave-one-event-out evaluation.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod hash;
pub mod models;
pub mod mos;
pub mod nn;
pub mod preprocess;
pub mod synthetic;

pub use data::{Dataset, Label, LabelScheme, Provenance, Thread, Tweet, UserProfile};
pub use error::{Error, Result};
pub use eval::{AugmentVariant, ExperimentConfig, Metrics, Schedule};
pub use features::{EmbeddingProvider, EmbeddingTable, GraphSample};
pub use models::{ModelConfig, ModelKind, TrainConfig};
pub use mos::{AugmentationStrategy, CandidateTable, StrategyKind};
pub use preprocess::{normalize_tweet, PreprocessedText};
