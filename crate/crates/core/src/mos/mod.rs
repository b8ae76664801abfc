//! Multifold oversampling: per-event class balancing by augmenting threads.

mod augment;
mod candidates;
mod influence;
mod oversample;

pub use augment::{
    augment_thread, augmented_id, select_tweets, substitute_tweet, thread_stream, thread_vocabulary,
    AugmentStats, AugmentationStrategy, StrategyKind, SubstitutionSource,
};
pub use candidates::CandidateTable;
pub use influence::{influence_weights, InfluenceDistribution};
pub use oversample::{oversample_dataset, oversample_label, plan_oversample, MosReport, OversamplePlan};
