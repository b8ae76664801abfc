//! Tweets, threads, events and datasets.
//!
//! A [`Thread`] is always stored in canonical order: the source tweet first,
//! then replies sorted by `(created_at, id)`. Every constructor goes through
//! [`Thread::new`], so node ordering is stable no matter how the raw archive
//! listed its reactions.

mod graph;
mod ingest;
mod jsonl;
mod validate;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::{build_propagation_graph, AdjacencyStructure};
pub use ingest::{ingest_pheme, IngestOutcome, SkipReport, SkippedThread};
pub use validate::{validate_dataset, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    Binary,
    Ternary,
}

impl LabelScheme {
    pub fn classes(self) -> &'static [Label] {
        match self {
            LabelScheme::Binary => &[Label::Rumour, Label::NonRumour],
            LabelScheme::Ternary => &[Label::True, Label::False, Label::Unverified],
        }
    }

    pub fn num_classes(self) -> usize {
        self.classes().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelScheme::Binary => "binary",
            LabelScheme::Ternary => "ternary",
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(LabelScheme::Binary),
            "ternary" => Ok(LabelScheme::Ternary),
            other => Err(Error::Config(format!("unknown label scheme {other:?}"))),
        }
    }
}

/// A thread label. Binary labels are rumour / non-rumour; ternary labels
/// are the veracity of a rumour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "LabelRecord", try_from = "LabelRecord")]
pub enum Label {
    Rumour,
    NonRumour,
    True,
    False,
    Unverified,
}

impl Label {
    pub fn scheme(self) -> LabelScheme {
        match self {
            Label::Rumour | Label::NonRumour => LabelScheme::Binary,
            Label::True | Label::False | Label::Unverified => LabelScheme::Ternary,
        }
    }

    /// Position of this label in `scheme().classes()`.
    pub fn class_index(self) -> usize {
        match self {
            Label::Rumour | Label::True => 0,
            Label::NonRumour | Label::False => 1,
            Label::Unverified => 2,
        }
    }

    pub fn from_class(scheme: LabelScheme, index: usize) -> Option<Label> {
        scheme.classes().get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Rumour => "rumour",
            Label::NonRumour => "non_rumour",
            Label::True => "true",
            Label::False => "false",
            Label::Unverified => "unverified",
        }
    }

    pub fn parse(scheme: LabelScheme, value: &str) -> Result<Label> {
        scheme
            .classes()
            .iter()
            .copied()
            .find(|l| l.as_str() == value)
            .ok_or_else(|| Error::Invalid(format!("label {value:?} is not in the {scheme} scheme")))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    scheme: LabelScheme,
    value: String,
}

impl From<Label> for LabelRecord {
    fn from(l: Label) -> Self {
        LabelRecord {
            scheme: l.scheme(),
            value: l.as_str().to_owned(),
        }
    }
}

impl TryFrom<LabelRecord> for Label {
    type Error = Error;

    fn try_from(r: LabelRecord) -> Result<Label> {
        Label::parse(r.scheme, &r.value)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub tweet_count: u64,
    pub listed_count: u64,
    pub followers: u64,
    pub following: u64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: u64,
    pub text: String,
    /// UTC seconds since the epoch.
    pub created_at: i64,
    pub parent_id: Option<u64>,
    /// `None` when the archive carried no user object for this tweet.
    pub user: Option<UserProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Augmented { parent: String, fold: u32 },
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        matches!(self, Provenance::Original)
    }

    /// The original thread this one descends from (itself when original).
    pub fn root_id<'a>(&'a self, own_id: &'a str) -> &'a str {
        match self {
            Provenance::Original => own_id,
            Provenance::Augmented { parent, .. } => parent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: String,
    pub event: String,
    pub label: Label,
    pub provenance: Provenance,
    pub tweets: Vec<Tweet>,
}

impl Thread {
    /// Build a thread, putting tweets into canonical order and checking the
    /// tree invariants.
    pub fn new(
        thread_id: impl Into<String>,
        event: impl Into<String>,
        label: Label,
        provenance: Provenance,
        mut tweets: Vec<Tweet>,
    ) -> Result<Thread> {
        canonicalize(&mut tweets);
        let thread = Thread {
            thread_id: thread_id.into(),
            event: event.into(),
            label,
            provenance,
            tweets,
        };
        thread.validate()?;
        Ok(thread)
    }

    pub fn source(&self) -> &Tweet {
        &self.tweets[0]
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn is_original(&self) -> bool {
        self.provenance.is_original()
    }

    /// Check canonical ordering and the tree invariants.
    pub fn validate(&self) -> Result<()> {
        let err = |tweet_id: u64, message: &str| Error::InvalidThread {
            thread_id: self.thread_id.clone(),
            tweet_id,
            message: message.to_owned(),
        };
        let Some(source) = self.tweets.first() else {
            return Err(err(0, "thread has no tweets"));
        };
        if source.parent_id.is_some() {
            return Err(err(source.id, "first tweet must be the parentless source"));
        }

        let mut index: HashMap<u64, usize> = HashMap::with_capacity(self.tweets.len());
        for (i, t) in self.tweets.iter().enumerate() {
            if index.insert(t.id, i).is_some() {
                return Err(err(t.id, "duplicate tweet id"));
            }
        }
        for pair in self.tweets[1..].windows(2) {
            if (pair[0].created_at, pair[0].id) > (pair[1].created_at, pair[1].id) {
                return Err(err(pair[1].id, "replies are not in canonical order"));
            }
        }
        for t in &self.tweets[1..] {
            let Some(pid) = t.parent_id else {
                return Err(err(t.id, "second parentless tweet"));
            };
            let Some(&p) = index.get(&pid) else {
                return Err(err(t.id, "parent is not in the thread"));
            };
            if self.tweets[p].created_at > t.created_at {
                return Err(err(t.id, "reply predates its parent"));
            }
        }

        // Reachability from the source rules out cycles among replies.
        let mut children: HashMap<u64, Vec<u64>> = HashMap::new();
        for t in &self.tweets[1..] {
            children.entry(t.parent_id.unwrap()).or_default().push(t.id);
        }
        let mut seen = HashSet::with_capacity(self.tweets.len());
        let mut stack = vec![source.id];
        while let Some(id) = stack.pop() {
            seen.insert(id);
            if let Some(c) = children.get(&id) {
                stack.extend(c.iter().copied());
            }
        }
        if let Some(t) = self.tweets.iter().find(|t| !seen.contains(&t.id)) {
            return Err(err(t.id, "tweet is unreachable from the source (cycle)"));
        }
        Ok(())
    }
}

/// Source first, replies by `(created_at, id)`.
fn canonicalize(tweets: &mut [Tweet]) {
    tweets.sort_by_key(|t| (t.parent_id.is_some(), t.created_at, t.id));
}

/// Threads grouped by event under a single label scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub scheme: LabelScheme,
    pub events: BTreeMap<String, Vec<Thread>>,
}

impl Dataset {
    pub fn new(scheme: LabelScheme) -> Self {
        Dataset {
            scheme,
            events: BTreeMap::new(),
        }
    }

    /// Group threads by their `event` field, preserving input order within
    /// each event.
    pub fn from_threads(scheme: LabelScheme, threads: impl IntoIterator<Item = Thread>) -> Result<Self> {
        let mut d = Dataset::new(scheme);
        for t in threads {
            if t.label.scheme() != scheme {
                return Err(Error::Invalid(format!(
                    "thread {} has a {} label in a {} dataset",
                    t.thread_id,
                    t.label.scheme(),
                    scheme
                )));
            }
            d.events.entry(t.event.clone()).or_default().push(t);
        }
        Ok(d)
    }

    pub fn threads(&self) -> impl Iterator<Item = &Thread> {
        self.events.values().flatten()
    }

    pub fn num_threads(&self) -> usize {
        self.events.values().map(Vec::len).sum()
    }

    pub fn event_names(&self) -> impl Iterator<Item = &str> {
        self.events.keys().map(String::as_str)
    }

    /// Per-label thread counts of one event, indexed by class.
    pub fn label_counts(&self, event: &str) -> Vec<usize> {
        let mut counts = vec![0; self.scheme.num_classes()];
        for t in self.events.get(event).into_iter().flatten() {
            counts[t.label.class_index()] += 1;
        }
        counts
    }

    /// Only the original (non-augmented) threads.
    pub fn originals(&self) -> Dataset {
        Dataset {
            scheme: self.scheme,
            events: self
                .events
                .iter()
                .map(|(e, ts)| (e.clone(), ts.iter().filter(|t| t.is_original()).cloned().collect()))
                .collect(),
        }
    }
}
