//! Seeded synthetic threads for smoke tests, benchmarks and fixtures.
//!
//! Each class owns a small vocabulary; "signal" tweets mix class words with
//! shared noise words, the rest use noise only. Under the hash embedding the
//! classes form separable clusters.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde_json::{json, Map, Value};

use crate::data::{Dataset, Label, LabelScheme, Provenance, Thread, Tweet, UserProfile};
use crate::error::{Error, Result};
use crate::hash;

const CLASS_WORDS: usize = 8;
const NOISE_WORDS: usize = 24;
const BASE_TIME: i64 = 1_420_070_400;

/// Where the class signal lives in a thread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    /// Every tweet carries class words.
    Everywhere,
    /// Only the source tweet carries class words.
    SourceOnly,
    /// The source and replies before `after_hours` are pure noise; later
    /// replies carry the class words.
    Late { after_hours: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub scheme: LabelScheme,
    /// Event name and per-class thread counts.
    pub events: Vec<(String, Vec<usize>)>,
    pub min_replies: usize,
    pub max_replies: usize,
    pub signal: Signal,
    /// Probability that a signal tweet uses another class's words instead.
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(scheme: LabelScheme, events: Vec<(String, Vec<usize>)>, seed: u64) -> Self {
        SyntheticSpec {
            scheme,
            events,
            min_replies: 1,
            max_replies: 6,
            signal: Signal::Everywhere,
            label_noise: 0.0,
            seed,
        }
    }

    /// Binary events with equal halves, `total` threads spread over
    /// `n_events` events.
    pub fn balanced_binary(total: usize, n_events: usize, seed: u64) -> Self {
        let per = total / n_events;
        let events = (0..n_events)
            .map(|e| {
                let n = if e + 1 == n_events { total - per * (n_events - 1) } else { per };
                (format!("event{e}"), vec![n - n / 2, n / 2])
            })
            .collect();
        Self::new(LabelScheme::Binary, events, seed)
    }
}

pub fn class_word(class: usize, k: usize) -> String {
    format!("cls{class}word{k}")
}

fn noise_word(k: usize) -> String {
    format!("filler{k}")
}

fn sentence<R: Rng>(rng: &mut R, class: Option<usize>) -> String {
    let n = rng.random_range(4..=8);
    let mut words: Vec<String> = (0..n).map(|_| noise_word(rng.random_range(0..NOISE_WORDS))).collect();
    if let Some(c) = class {
        for w in words.iter_mut().take(3) {
            *w = class_word(c, rng.random_range(0..CLASS_WORDS));
        }
        let extra = rng.random_range(0..3);
        for _ in 0..extra {
            let i = rng.random_range(0..words.len());
            words[i] = class_word(c, rng.random_range(0..CLASS_WORDS));
        }
    }
    match rng.random_range(0..6) {
        0 => words.push("https://t.co/x".into()),
        1 => words.insert(0, "@someone".into()),
        _ => {}
    }
    words.join(" ")
}

fn user<R: Rng>(rng: &mut R) -> UserProfile {
    UserProfile {
        tweet_count: rng.random_range(0..200_000),
        listed_count: rng.random_range(0..500),
        followers: rng.random_range(0..50_000),
        following: rng.random_range(0..5_000),
        verified: rng.random_bool(0.1),
    }
}

fn one_thread(spec: &SyntheticSpec, event: &str, label: Label, index: usize, next_id: &mut u64) -> Result<Thread> {
    let thread_id = format!("{event}-{index:04}");
    let mut rng = hash::stream(spec.seed, &[b"synthetic", thread_id.as_bytes()]);
    let classes = spec.scheme.num_classes();
    let true_class = label.class_index();
    let pick_class = |rng: &mut rand_chacha::ChaCha8Rng| {
        if spec.label_noise > 0.0 && rng.random_bool(spec.label_noise) {
            rng.random_range(0..classes)
        } else {
            true_class
        }
    };
    let start = BASE_TIME + rng.random_range(0..86_400 * 30);
    let n_replies = rng.random_range(spec.min_replies..=spec.max_replies.max(spec.min_replies));

    let mut times = vec![0i64];
    match spec.signal {
        Signal::Late { after_hours } => {
            let cut = (after_hours * 3600.0) as i64;
            let n_early = n_replies / 2;
            for _ in 0..n_early {
                times.push(rng.random_range(60..cut.max(61)));
            }
            for _ in n_early..n_replies {
                times.push(rng.random_range(cut + 60..72 * 3600));
            }
        }
        _ => {
            for _ in 0..n_replies {
                times.push(rng.random_range(60..72 * 3600));
            }
        }
    }
    times[1..].sort_unstable();

    let mut tweets: Vec<Tweet> = Vec::with_capacity(times.len());
    for (i, &dt) in times.iter().enumerate() {
        let carries = match spec.signal {
            Signal::Everywhere => true,
            Signal::SourceOnly => i == 0,
            Signal::Late { after_hours } => i > 0 && dt as f64 > after_hours * 3600.0,
        };
        let class = if carries { Some(pick_class(&mut rng)) } else { None };
        let id = *next_id;
        *next_id += 1;
        let parent_id = (i > 0).then(|| tweets[rng.random_range(0..i)].id);
        tweets.push(Tweet {
            id,
            text: sentence(&mut rng, class),
            created_at: start + dt,
            parent_id,
            user: Some(user(&mut rng)),
        });
    }
    Thread::new(thread_id, event, label, Provenance::Original, tweets)
}

pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let classes = spec.scheme.classes();
    let mut threads = Vec::new();
    let mut next_id = 1_000_000u64;
    for (event, counts) in &spec.events {
        if counts.len() != classes.len() {
            return Err(Error::Config(format!(
                "event {event}: {} counts for {} classes",
                counts.len(),
                classes.len()
            )));
        }
        let mut index = 0;
        for (c, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                threads.push(one_thread(spec, event, classes[c], index, &mut next_id)?);
                index += 1;
            }
        }
    }
    Dataset::from_threads(spec.scheme, threads)
}

fn twitter_time(t: i64) -> String {
    chrono::DateTime::from_timestamp(t, 0)
        .expect("timestamp in range")
        .format("%a %b %d %H:%M:%S %z %Y")
        .to_string()
}

fn tweet_json(t: &Tweet) -> Value {
    let mut v = json!({
        "id": t.id,
        "id_str": t.id.to_string(),
        "text": t.text,
        "created_at": twitter_time(t.created_at),
        "in_reply_to_status_id": t.parent_id,
    });
    if let Some(u) = &t.user {
        v["user"] = json!({
            "statuses_count": u.tweet_count,
            "listed_count": u.listed_count,
            "followers_count": u.followers,
            "friends_count": u.following,
            "verified": u.verified,
        });
    }
    v
}

fn structure_json(t: &Thread) -> Value {
    let mut children: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for tw in &t.tweets {
        if let Some(p) = tw.parent_id {
            children.entry(p).or_default().push(tw.id);
        }
    }
    fn node(id: u64, children: &BTreeMap<u64, Vec<u64>>) -> Value {
        match children.get(&id) {
            None => Value::Array(Vec::new()),
            Some(cs) => {
                let mut m = Map::new();
                for &c in cs {
                    m.insert(c.to_string(), node(c, children));
                }
                Value::Object(m)
            }
        }
    }
    let root = t.source().id;
    let mut m = Map::new();
    m.insert(root.to_string(), node(root, &children));
    Value::Object(m)
}

fn annotation_json(label: Label) -> Value {
    match label {
        Label::Rumour => json!({"is_rumour": "rumour"}),
        Label::NonRumour => json!({"is_rumour": "nonrumour"}),
        Label::True => json!({"is_rumour": "rumour", "misinformation": 0, "true": 1}),
        Label::False => json!({"is_rumour": "rumour", "misinformation": 1, "true": 0}),
        Label::Unverified => json!({"is_rumour": "rumour", "misinformation": 0, "true": 0}),
    }
}

fn write(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(v).expect("json serializes")).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Write a dataset in the raw archive layout:
/// `<event>-all-rnr-threads/{rumours,non-rumours}/<thread>/...`.
pub fn write_pheme_archive(d: &Dataset, root: &Path) -> Result<()> {
    for (event, threads) in &d.events {
        for t in threads {
            let group = if t.label == Label::NonRumour { "non-rumours" } else { "rumours" };
            let dir = root.join(format!("{event}-all-rnr-threads")).join(group).join(&t.thread_id);
            mkdir(&dir.join("source-tweets"))?;
            mkdir(&dir.join("reactions"))?;
            let src = t.source();
            write(&dir.join("source-tweets").join(format!("{}.json", src.id)), &tweet_json(src))?;
            for tw in &t.tweets[1..] {
                write(&dir.join("reactions").join(format!("{}.json", tw.id)), &tweet_json(tw))?;
            }
            write(&dir.join("structure.json"), &structure_json(t))?;
            write(&dir.join("annotation.json"), &annotation_json(t.label))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ingest_pheme;

    #[test]
    fn counts_and_determinism() {
        let spec = SyntheticSpec::new(
            LabelScheme::Ternary,
            vec![("a".into(), vec![3, 2, 1]), ("b".into(), vec![0, 1, 4])],
            7,
        );
        let d = synthetic_dataset(&spec).unwrap();
        assert_eq!(d.label_counts("a"), [3, 2, 1]);
        assert_eq!(d.label_counts("b"), [0, 1, 4]);
        assert_eq!(d, synthetic_dataset(&spec).unwrap());
    }

    #[test]
    fn late_signal_layout() {
        let mut spec = SyntheticSpec::balanced_binary(10, 2, 1);
        spec.signal = Signal::Late { after_hours: 6.0 };
        spec.min_replies = 2;
        let d = synthetic_dataset(&spec).unwrap();
        for t in d.threads() {
            assert!(!t.source().text.contains("cls"));
            let late = t.tweets.iter().filter(|w| w.created_at - t.source().created_at > 6 * 3600);
            assert!(late.clone().count() >= 1);
            assert!(late.clone().all(|w| w.text.contains("cls")));
        }
    }

    #[test]
    fn archive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for scheme in [LabelScheme::Binary, LabelScheme::Ternary] {
            let counts = if scheme == LabelScheme::Binary { vec![2, 3] } else { vec![1, 2, 1] };
            let spec = SyntheticSpec::new(scheme, vec![("x".into(), counts.clone()), ("y".into(), counts)], 3);
            let d = synthetic_dataset(&spec).unwrap();
            let root = dir.path().join(scheme.as_str());
            write_pheme_archive(&d, &root).unwrap();
            let out = ingest_pheme(&root, scheme).unwrap();
            assert!(out.skips.skipped.is_empty());
            assert_eq!(out.dataset, d);
        }
    }
}
