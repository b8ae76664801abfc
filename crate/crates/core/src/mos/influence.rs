use crate::data::Thread;
use crate::preprocess::{normalize_tweet, PreprocessedText};

/// Per-tweet influence scores and the selection distribution derived from
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDistribution {
    pub weights: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl InfluenceDistribution {
    /// Score = token count minus keyword count. When every score is zero the
    /// distribution is uniform over tweets with at least one token (or over
    /// all tweets if none has any).
    pub fn from_texts(texts: &[PreprocessedText]) -> Self {
        let weights: Vec<f64> = texts.iter().map(|p| (p.len() - p.keyword_count()) as f64).collect();
        let total: f64 = weights.iter().sum();
        let normalized = if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            let has_tokens: Vec<bool> = texts.iter().map(|p| !p.is_empty()).collect();
            let n = has_tokens.iter().filter(|&&b| b).count();
            if n == 0 {
                vec![1.0 / texts.len().max(1) as f64; texts.len()]
            } else {
                has_tokens.iter().map(|&b| if b { 1.0 / n as f64 } else { 0.0 }).collect()
            }
        };
        InfluenceDistribution { weights, normalized }
    }
}

pub fn influence_weights(thread: &Thread) -> InfluenceDistribution {
    let texts: Vec<PreprocessedText> = thread.tweets.iter().map(|t| normalize_tweet(&t.text)).collect();
    InfluenceDistribution::from_texts(&texts)
}
