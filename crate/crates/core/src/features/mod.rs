//! Per-node features: text embedding followed by four user-behaviour values.

mod embedding;
mod user;

use crate::data::{AdjacencyStructure, Thread};
use crate::error::{Error, Result};
use crate::nn::Tensor2;
use crate::preprocess::normalize_tweet;

pub use embedding::{hash_embedding, EmbeddingProvider, EmbeddingTable, ProviderKind};
pub use user::user_features;

pub const USER_FEATURES: usize = 4;

/// Width of the hashing embedding when no table is given.
pub const DEFAULT_HASH_DIM: usize = 64;

/// Node features of one thread; row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Tensor2,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn m(&self) -> usize {
        self.values.cols()
    }

    /// Reorder rows so that node `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> FeatureMatrix {
        let mut out = Tensor2::zeros(self.n(), self.m());
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(p).copy_from_slice(self.values.row(i));
        }
        FeatureMatrix { values: out }
    }
}

pub fn feature_width(provider: &EmbeddingProvider) -> usize {
    provider.dim() + USER_FEATURES
}

pub fn assemble_feature_matrix(thread: &Thread, provider: &EmbeddingProvider) -> Result<FeatureMatrix> {
    let m = feature_width(provider);
    let mut values = Tensor2::zeros(thread.len(), m);
    for (i, tweet) in thread.tweets.iter().enumerate() {
        let text = normalize_tweet(&tweet.text);
        let emb = provider.embed(&text).map_err(|e| match e {
            Error::MissingEmbedding { key, .. } => Error::MissingEmbedding { key, node: Some(i) },
            other => other,
        })?;
        if emb.len() != provider.dim() {
            return Err(Error::EmbeddingWidth {
                expected: provider.dim(),
                found: emb.len(),
            });
        }
        let row = values.row_mut(i);
        row[..emb.len()].copy_from_slice(&emb);
        let user = tweet.user.unwrap_or_default();
        row[emb.len()..].copy_from_slice(&user_features(&user));
    }
    Ok(FeatureMatrix { values })
}

/// Features and propagation graph of one labelled thread.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub thread_id: String,
    pub features: FeatureMatrix,
    pub graph: AdjacencyStructure,
    pub label: usize,
}

impl GraphSample {
    pub fn from_thread(thread: &Thread, provider: &EmbeddingProvider) -> Result<Self> {
        Ok(GraphSample {
            thread_id: thread.thread_id.clone(),
            features: assemble_feature_matrix(thread, provider)?,
            graph: crate::data::build_propagation_graph(thread)?,
            label: thread.label.class_index(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::*;
    use crate::data::{Label, Provenance, Thread, UserProfile};

    fn three_tweet_thread() -> Thread {
        thread(
            "1",
            "e",
            Label::Rumour,
            vec![
                tweet(1, None, 0, "Breaking: the bridge is closed"),
                tweet(2, Some(1), 60, "@a source? https://x.co"),
                tweet(3, Some(1), 90, "no way 😂"),
            ],
        )
    }

    #[test]
    fn shape_is_nodes_by_dim_plus_four() {
        let fm = assemble_feature_matrix(&three_tweet_thread(), &EmbeddingProvider::hash_fallback(8)).unwrap();
        assert_eq!((fm.n(), fm.m()), (3, 12));
        assert!(fm.values.is_finite());
    }

    #[test]
    fn reply_insertion_order_does_not_matter() {
        let t = three_tweet_thread();
        let mut shuffled = t.tweets.clone();
        shuffled.reverse();
        let t2 = Thread::new("1", "e", Label::Rumour, Provenance::Original, shuffled).unwrap();
        let prov = EmbeddingProvider::hash_fallback(8);
        assert_eq!(
            assemble_feature_matrix(&t, &prov).unwrap(),
            assemble_feature_matrix(&t2, &prov).unwrap()
        );
    }

    #[test]
    fn shared_user_gives_constant_user_columns() {
        let mut t = three_tweet_thread();
        let u = UserProfile {
            tweet_count: 5000,
            listed_count: 3,
            followers: 20,
            following: 400,
            verified: true,
        };
        for tw in &mut t.tweets {
            tw.user = Some(u);
        }
        let fm = assemble_feature_matrix(&t, &EmbeddingProvider::hash_fallback(8)).unwrap();
        for r in 0..3 {
            assert_eq!(&fm.values.row(r)[8..], &[4.0, 1.0, -2.0, 1.0]);
        }
    }

    #[test]
    fn embedding_rows_are_unit_or_zero() {
        let fm = assemble_feature_matrix(&three_tweet_thread(), &EmbeddingProvider::hash_fallback(16)).unwrap();
        for r in 0..fm.n() {
            let norm = fm.values.row(r)[..16].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_embedding_reports_node() {
        let prov = EmbeddingProvider::file_backed(EmbeddingTable::new(4));
        let err = assemble_feature_matrix(&three_tweet_thread(), &prov).unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding { node: Some(0), .. }));
    }
}
