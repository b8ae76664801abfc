use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{build_propagation_graph, Dataset};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    /// Per label name, all threads.
    pub labels: BTreeMap<String, usize>,
    pub originals: usize,
    pub augmented: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub scheme: String,
    pub threads: usize,
    pub events: BTreeMap<String, EventCounts>,
    pub violations: Vec<String>,
    pub duplicate_ids: Vec<String>,
    /// `(thread_id, tweet_id)` of tweets archived without user metadata.
    pub missing_user: Vec<(String, u64)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.duplicate_ids.is_empty()
    }

    /// True when, in every event, all non-empty labels have the same count.
    pub fn is_balanced(&self) -> bool {
        self.events.values().all(|c| {
            let mut nonzero = c.labels.values().filter(|&&n| n > 0);
            match nonzero.next() {
                Some(first) => nonzero.all(|n| n == first),
                None => true,
            }
        })
    }

    pub fn count(&self, event: &str, label: &str) -> usize {
        self.events
            .get(event)
            .and_then(|c| c.labels.get(label))
            .copied()
            .unwrap_or(0)
    }
}

pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut events = BTreeMap::new();
    let mut violations = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut missing_user = Vec::new();

    for (name, threads) in &d.events {
        let mut c = EventCounts::default();
        for l in d.scheme.classes() {
            c.labels.insert(l.as_str().to_owned(), 0);
        }
        for t in threads {
            *seen.entry(t.thread_id.as_str()).or_default() += 1;
            if t.event != *name {
                violations.push(format!("thread {} has event {:?} but is filed under {name:?}", t.thread_id, t.event));
            }
            if t.label.scheme() != d.scheme {
                violations.push(format!("thread {} has a {} label", t.thread_id, t.label.scheme()));
            }
            *c.labels.entry(t.label.as_str().to_owned()).or_default() += 1;
            if t.is_original() {
                c.originals += 1;
            } else {
                c.augmented += 1;
            }
            match build_propagation_graph(t) {
                Ok(g) if g.edges.len() + 1 == g.n => {}
                Ok(g) => violations.push(format!("thread {}: {} edges for {} nodes", t.thread_id, g.edges.len(), g.n)),
                Err(e) => violations.push(e.to_string()),
            }
            for tw in &t.tweets {
                if tw.user.is_none() {
                    missing_user.push((t.thread_id.clone(), tw.id));
                }
            }
        }
        events.insert(name.clone(), c);
    }

    let mut duplicate_ids: Vec<String> = seen
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(id, _)| id.to_owned())
        .collect();
    duplicate_ids.sort();

    ValidationReport {
        scheme: d.scheme.to_string(),
        threads: d.num_threads(),
        events,
        violations,
        duplicate_ids,
        missing_user,
    }
}
