use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::candidates::CandidateTable;
use super::influence::InfluenceDistribution;
use crate::data::{Provenance, Thread};
use crate::error::{Error, Result};
use crate::hash;
use crate::preprocess::{is_keyword, normalize_tweet, PreprocessedText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Nonrandom,
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "ra" => Ok(StrategyKind::Random),
            "nonrandom" | "non-random" | "nra" => Ok(StrategyKind::Nonrandom),
            other => Err(Error::Config(format!("unknown augmentation variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::Random => "random",
            StrategyKind::Nonrandom => "nonrandom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationStrategy {
    pub kind: StrategyKind,
    /// Fraction of a thread's tweets rewritten per augmented copy.
    pub p_aug: f64,
    pub fold_cap: u32,
    /// Fraction of a selected tweet's non-keyword tokens substituted.
    pub token_rate: f64,
    pub seed: u64,
}

impl AugmentationStrategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        AugmentationStrategy {
            kind,
            p_aug: 0.2,
            fold_cap: 3,
            token_rate: 0.15,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_aug > 0.0 && self.p_aug <= 1.0) {
            return Err(Error::Config(format!("p_aug must be in (0, 1], got {}", self.p_aug)));
        }
        if self.fold_cap == 0 {
            return Err(Error::Config("fold_cap must be at least 1".into()));
        }
        if !(self.token_rate > 0.0 && self.token_rate <= 1.0) {
            return Err(Error::Config(format!("token_rate must be in (0, 1], got {}", self.token_rate)));
        }
        Ok(())
    }

    /// Number of tweets rewritten in an `n`-tweet thread.
    pub fn tweets_to_augment(&self, n: usize) -> usize {
        if n == 0 {
            return 0;
        }
        ((self.p_aug * n as f64).round() as usize).clamp(1, n)
    }
}

/// Where substitutes come from.
#[derive(Debug, Clone, Copy)]
pub enum SubstitutionSource<'a> {
    Candidates(&'a CandidateTable),
    /// Fallback: sorted, deduplicated non-keyword tokens of the thread.
    ThreadVocabulary(&'a [String]),
}

/// What happened while building one augmented copy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    /// Indices (canonical order) of the tweets chosen for rewriting.
    pub selected: Vec<usize>,
    pub substituted_tweets: usize,
    pub unchanged_tweets: usize,
    pub substituted_tokens: usize,
}

impl AugmentStats {
    pub fn merge(&mut self, other: &AugmentStats) {
        self.substituted_tweets += other.substituted_tweets;
        self.unchanged_tweets += other.unchanged_tweets;
        self.substituted_tokens += other.substituted_tokens;
    }
}

fn usable(candidate: &str, original: &str) -> bool {
    candidate != original && !is_keyword(candidate) && {
        let p = normalize_tweet(candidate);
        p.tokens.len() == 1 && p.tokens[0] == candidate
    }
}

/// Rewrite up to `max(1, round(rate * #non-keyword))` non-keyword positions.
/// Keyword tokens are never touched; positions without a usable substitute
/// are not eligible.
pub fn substitute_tweet<R: Rng + ?Sized>(
    p: &PreprocessedText,
    text_key: u64,
    source: SubstitutionSource<'_>,
    token_rate: f64,
    rng: &mut R,
) -> PreprocessedText {
    let non_kw: Vec<usize> = p.non_keyword_positions().collect();
    if non_kw.is_empty() {
        return p.clone();
    }
    let s = ((token_rate * non_kw.len() as f64).round() as usize).max(1);
    let eligible: Vec<usize> = non_kw
        .into_iter()
        .filter(|&i| {
            let orig = &p.tokens[i];
            match source {
                SubstitutionSource::Candidates(table) => table
                    .get(text_key, i)
                    .is_some_and(|c| c.iter().any(|c| usable(c, orig))),
                SubstitutionSource::ThreadVocabulary(vocab) => vocab.iter().any(|v| v != orig),
            }
        })
        .collect();
    if eligible.is_empty() {
        return p.clone();
    }
    let take = s.min(eligible.len());
    let mut chosen: Vec<usize> = sample(rng, eligible.len(), take).into_iter().map(|j| eligible[j]).collect();
    chosen.sort_unstable();

    let mut tokens = p.tokens.clone();
    for i in chosen {
        let orig = &p.tokens[i];
        tokens[i] = match source {
            SubstitutionSource::Candidates(table) => table
                .get(text_key, i)
                .and_then(|c| c.iter().find(|c| usable(c, orig)))
                .cloned()
                .expect("eligible position has a usable candidate"),
            SubstitutionSource::ThreadVocabulary(vocab) => {
                let others: Vec<&String> = vocab.iter().filter(|v| *v != orig).collect();
                others[rng.random_range(0..others.len())].clone()
            }
        };
    }
    PreprocessedText::from_tokens(tokens)
}

/// Pick `k` distinct tweets, uniformly or weighted by influence without
/// replacement. Returned indices are sorted.
pub fn select_tweets<R: Rng + ?Sized>(
    dist: &InfluenceDistribution,
    kind: StrategyKind,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = dist.normalized.len();
    let mut picked = match kind {
        StrategyKind::Random => sample(rng, n, k.min(n)).into_vec(),
        StrategyKind::Nonrandom => {
            let mut w = dist.normalized.clone();
            let positive = w.iter().filter(|&&x| x > 0.0).count();
            let mut out = Vec::with_capacity(k.min(positive));
            for _ in 0..k.min(positive) {
                let total: f64 = w.iter().sum();
                let mut r = rng.random::<f64>() * total;
                let mut idx = None;
                for (i, &wi) in w.iter().enumerate() {
                    if wi <= 0.0 {
                        continue;
                    }
                    idx = Some(i);
                    if r < wi {
                        break;
                    }
                    r -= wi;
                }
                let i = idx.expect("positive weight remains");
                out.push(i);
                w[i] = 0.0;
            }
            out
        }
    };
    picked.sort_unstable();
    picked
}

/// Sorted, deduplicated non-keyword tokens across a thread.
pub fn thread_vocabulary(texts: &[PreprocessedText]) -> Vec<String> {
    let set: BTreeSet<&String> = texts
        .iter()
        .flat_map(|p| p.non_keyword_positions().map(|i| &p.tokens[i]))
        .collect();
    set.into_iter().cloned().collect()
}

pub fn augmented_id(parent: &str, fold: u32) -> String {
    format!("{parent}~aug{fold}")
}

/// Build augmented copy number `fold` of an original thread. Without a
/// candidate table, substitutes are drawn from the thread's own vocabulary.
pub fn augment_thread<R: Rng + ?Sized>(
    t: &Thread,
    strategy: &AugmentationStrategy,
    candidates: Option<&CandidateTable>,
    fold: u32,
    rng: &mut R,
) -> (Thread, AugmentStats) {
    let texts: Vec<PreprocessedText> = t.tweets.iter().map(|tw| normalize_tweet(&tw.text)).collect();
    let dist = InfluenceDistribution::from_texts(&texts);
    let k = strategy.tweets_to_augment(t.len());
    let selected = select_tweets(&dist, strategy.kind, k, rng);

    let vocab;
    let source = match candidates {
        Some(c) => SubstitutionSource::Candidates(c),
        None => {
            vocab = thread_vocabulary(&texts);
            SubstitutionSource::ThreadVocabulary(&vocab)
        }
    };

    let mut out = t.clone();
    let mut stats = AugmentStats::default();
    for &i in &selected {
        let p = &texts[i];
        let q = substitute_tweet(p, p.text_key(), source, strategy.token_rate, rng);
        let changed = p.tokens.iter().zip(&q.tokens).filter(|(a, b)| a != b).count();
        if changed == 0 {
            stats.unchanged_tweets += 1;
        } else {
            stats.substituted_tweets += 1;
            stats.substituted_tokens += changed;
            out.tweets[i].text = q.joined();
        }
    }
    stats.selected = selected;
    out.provenance = Provenance::Augmented {
        parent: t.thread_id.clone(),
        fold,
    };
    out.thread_id = augmented_id(&t.thread_id, fold);
    (out, stats)
}

/// The RNG stream for one augmented copy.
pub fn thread_stream(seed: u64, thread_id: &str, fold: u32) -> rand_chacha::ChaCha8Rng {
    hash::stream(seed, &[thread_id.as_bytes(), &fold.to_le_bytes()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::*;
    use crate::data::Label;

    fn toks(s: &[&str]) -> PreprocessedText {
        PreprocessedText::from_tokens(s.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn candidate_substitution_example() {
        let p = toks(&["the", "earth", "is", "flat"]);
        let mut table = CandidateTable::new();
        table.insert(p.text_key(), 3, vec!["round".into(), "flat".into()]).unwrap();
        let mut rng = thread_stream(1, "x", 1);
        let q = substitute_tweet(&p, p.text_key(), SubstitutionSource::Candidates(&table), 0.15, &mut rng);
        assert_eq!(q.tokens, ["the", "earth", "is", "round"]);
    }

    #[test]
    fn top_candidate_equal_to_original_is_skipped() {
        let p = toks(&["flat"]);
        let mut table = CandidateTable::new();
        table.insert(p.text_key(), 0, vec!["flat".into(), "HTTPURL".into(), "level".into()]).unwrap();
        let mut rng = thread_stream(1, "x", 1);
        let q = substitute_tweet(&p, p.text_key(), SubstitutionSource::Candidates(&table), 0.15, &mut rng);
        assert_eq!(q.tokens, ["level"]);
    }

    #[test]
    fn keywords_never_modified() {
        let p = toks(&["@USER", "HTTPURL", ":fire:"]);
        let vocab = vec!["a".to_string(), "b".to_string()];
        let mut rng = thread_stream(1, "x", 1);
        let q = substitute_tweet(&p, 0, SubstitutionSource::ThreadVocabulary(&vocab), 1.0, &mut rng);
        assert_eq!(q, p);
    }

    #[test]
    fn fallback_without_distinct_word_is_identity() {
        let p = toks(&["alone", "HTTPURL"]);
        let vocab = vec!["alone".to_string()];
        let mut rng = thread_stream(1, "x", 1);
        let q = substitute_tweet(&p, 0, SubstitutionSource::ThreadVocabulary(&vocab), 0.15, &mut rng);
        assert_eq!(q, p);
    }

    #[test]
    fn token_budget_respected() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let p = PreprocessedText::from_tokens(words.clone());
        let vocab = vec!["zz".to_string()];
        let mut rng = thread_stream(3, "x", 1);
        let q = substitute_tweet(&p, 0, SubstitutionSource::ThreadVocabulary(&vocab), 0.15, &mut rng);
        let changed = p.tokens.iter().zip(&q.tokens).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 3);
    }

    fn five_tweet_thread() -> Thread {
        thread(
            "t",
            "e",
            Label::Rumour,
            vec![
                tweet(1, None, 0, "breaking news about the storm"),
                tweet(2, Some(1), 1, "is this real"),
                tweet(3, Some(1), 2, "source please"),
                tweet(4, Some(2), 3, "seems fake to me"),
                tweet(5, Some(3), 4, "wait for confirmation"),
            ],
        )
    }

    #[test]
    fn five_tweets_one_rewritten() {
        let t = five_tweet_thread();
        let s = AugmentationStrategy::new(StrategyKind::Random, 9);
        assert_eq!(s.tweets_to_augment(5), 1);
        let (a, stats) = augment_thread(&t, &s, None, 1, &mut thread_stream(9, "t", 1));
        assert_eq!(stats.selected.len(), 1);
        let diff = t.tweets.iter().zip(&a.tweets).filter(|(x, y)| x.text != y.text).count();
        assert_eq!(diff, 1);
        assert_eq!(a.thread_id, "t~aug1");
        assert_eq!(a.provenance, Provenance::Augmented { parent: "t".into(), fold: 1 });
        a.validate().unwrap();
        for (x, y) in t.tweets.iter().zip(&a.tweets) {
            assert_eq!((x.id, x.parent_id, x.created_at, x.user), (y.id, y.parent_id, y.created_at, y.user));
        }
    }

    #[test]
    fn deterministic_for_fixed_stream() {
        let t = five_tweet_thread();
        let s = AugmentationStrategy::new(StrategyKind::Nonrandom, 4);
        let a = augment_thread(&t, &s, None, 2, &mut thread_stream(4, "t", 2));
        let b = augment_thread(&t, &s, None, 2, &mut thread_stream(4, "t", 2));
        assert_eq!(a, b);
    }

    #[test]
    fn nonrandom_never_picks_zero_weight() {
        let t = thread(
            "z",
            "e",
            Label::Rumour,
            vec![
                tweet(1, None, 0, "@USER HTTPURL"),
                tweet(2, Some(1), 1, "the earth is flat"),
                tweet(3, Some(1), 2, "no way 😂"),
            ],
        );
        let s = AugmentationStrategy::new(StrategyKind::Nonrandom, 0);
        let mut counts = [0usize; 3];
        for fold in 0..2000 {
            let (_, st) = augment_thread(&t, &s, None, fold, &mut thread_stream(0, "z", fold));
            assert_eq!(st.selected.len(), 1);
            counts[st.selected[0]] += 1;
        }
        assert_eq!(counts[0], 0);
        let ratio = counts[1] as f64 / counts[2] as f64;
        assert!((ratio - 2.0).abs() < 0.3, "{counts:?}");
    }

    #[test]
    fn strategy_validation() {
        let mut s = AugmentationStrategy::new(StrategyKind::Random, 0);
        s.validate().unwrap();
        s.p_aug = 0.0;
        assert!(s.validate().is_err());
        s.p_aug = 1.0;
        s.fold_cap = 0;
        assert!(s.validate().is_err());
    }
}
