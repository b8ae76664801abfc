//! Reader for PHEME-style archives.
//!
//! Layout: `<root>/<event>/[rumours|non-rumours/]<thread>/` where each thread
//! directory holds `source-tweet(s)/<id>.json`, `reactions/*.json`,
//! `structure.json` and `annotation.json`. Event directories named
//! `<event>-all-rnr-threads` are reported as `<event>`.
//!
//! Unreadable files abort ingestion. Anything wrong with a thread's
//! content (bad JSON, dangling or repeated ids in the reply structure,
//! missing or unknown labels) skips that thread and records why.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::{Dataset, Label, LabelScheme, Provenance, Thread, Tweet, UserProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedThread {
    pub event: String,
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    pub skipped: Vec<SkippedThread>,
}

impl SkipReport {
    pub fn len(&self) -> usize {
        self.skipped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skipped.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub dataset: Dataset,
    pub skips: SkipReport,
}

const EVENT_SUFFIX: &str = "-all-rnr-threads";

pub fn ingest_pheme(root: &Path, scheme: LabelScheme) -> Result<IngestOutcome> {
    let mut jobs = Vec::new();
    for event_dir in sorted_subdirs(root)? {
        let name = file_name(&event_dir);
        let event = name.strip_suffix(EVENT_SUFFIX).unwrap_or(&name).to_owned();
        let mut dirs = Vec::new();
        find_thread_dirs(&event_dir, 3, &mut dirs)?;
        jobs.extend(dirs.into_iter().map(|d| (event.clone(), d)));
    }

    let outcomes: Vec<(String, PathBuf, std::result::Result<Thread, String>)> = jobs
        .into_par_iter()
        .map(|(event, dir)| {
            let r = read_thread(&dir, &event, scheme)?;
            Ok((event, dir, r))
        })
        .collect::<Result<_>>()?;

    let mut dataset = Dataset::new(scheme);
    let mut skips = SkipReport::default();
    for (event, path, r) in outcomes {
        match r {
            Ok(t) => dataset.events.entry(event).or_default().push(t),
            Err(reason) => skips.skipped.push(SkippedThread { event, path, reason }),
        }
    }
    for threads in dataset.events.values_mut() {
        threads.sort_by(|a, b| a.thread_id.cmp(&b.thread_id));
    }
    Ok(IngestOutcome { dataset, skips })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let ft = entry.file_type().map_err(|e| Error::io(entry.path(), e))?;
        if ft.is_dir() && !file_name(&entry.path()).starts_with('.') {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn find_thread_dirs(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
    for sub in sorted_subdirs(dir)? {
        if sub.join("structure.json").is_file() {
            out.push(sub);
        } else if depth > 1 {
            find_thread_dirs(&sub, depth - 1, out)?;
        }
    }
    Ok(())
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let hidden = file_name(&p).starts_with('.');
        if !hidden && p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Read a JSON file. IO failures are hard errors, bad JSON is a skip reason.
fn read_json(path: &Path) -> Result<std::result::Result<Value, String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes).map_err(|e| format!("{}: invalid JSON: {e}", path.display())))
}

/// Outer error: unreadable file. Inner error: skip reason.
fn read_thread(dir: &Path, event: &str, scheme: LabelScheme) -> Result<std::result::Result<Thread, String>> {
    macro_rules! skip_on_err {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(reason) => return Ok(Err(reason)),
            }
        };
    }

    let annotation_path = dir.join("annotation.json");
    if !annotation_path.is_file() {
        return Ok(Err("missing annotation record".into()));
    }
    let annotation = skip_on_err!(read_json(&annotation_path)?);
    let label = skip_on_err!(label_from_annotation(&annotation, dir, scheme));

    let source_dir = ["source-tweets", "source-tweet"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_dir());
    let source_files = match source_dir {
        Some(d) => json_files(&d)?,
        None => Vec::new(),
    };
    if source_files.len() != 1 {
        return Ok(Err(format!("expected one source tweet record, found {}", source_files.len())));
    }
    let source = skip_on_err!(parse_tweet(&skip_on_err!(read_json(&source_files[0])?), &source_files[0]));

    let mut records: HashMap<u64, RawTweet> = HashMap::new();
    for f in json_files(&dir.join("reactions"))? {
        let t = skip_on_err!(parse_tweet(&skip_on_err!(read_json(&f)?), &f));
        if t.id != source.id {
            records.insert(t.id, t);
        }
    }

    let structure = skip_on_err!(read_json(&dir.join("structure.json"))?);
    let parents = skip_on_err!(parse_structure(&structure));
    let Some((&root, _)) = parents.iter().find(|(_, p)| p.is_none()) else {
        return Ok(Err("reply structure has no root".into()));
    };
    if root != source.id {
        return Ok(Err(format!(
            "reply structure root {root} is not the source tweet {}",
            source.id
        )));
    }

    let mut tweets = Vec::with_capacity(parents.len());
    tweets.push(source.into_tweet(None));
    for (&id, &parent) in &parents {
        if id == root {
            continue;
        }
        let Some(rec) = records.remove(&id) else {
            return Ok(Err(format!("reply structure references missing tweet {id}")));
        };
        tweets.push(rec.into_tweet(parent));
    }

    let thread_id = file_name(dir);
    Ok(Thread::new(thread_id, event, label, Provenance::Original, tweets).map_err(|e| e.to_string()))
}

fn flag(v: Option<&Value>) -> Option<bool> {
    match v? {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => n.as_i64().map(|x| x != 0),
        Value::String(s) => match s.trim() {
            "1" | "true" => Some(true),
            "0" | "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn label_from_annotation(a: &Value, dir: &Path, scheme: LabelScheme) -> std::result::Result<Label, String> {
    let is_rumour = match a.get("is_rumour").and_then(Value::as_str) {
        Some("rumour") => true,
        Some("nonrumour" | "non-rumour" | "non_rumour") => false,
        Some(other) => return Err(format!("unknown is_rumour value {other:?}")),
        None => {
            let parent = dir.parent().map(file_name).unwrap_or_default();
            match parent.as_str() {
                "rumours" => true,
                "non-rumours" => false,
                _ => return Err("annotation has no rumour label".into()),
            }
        }
    };
    match scheme {
        LabelScheme::Binary => Ok(if is_rumour { Label::Rumour } else { Label::NonRumour }),
        LabelScheme::Ternary => {
            if !is_rumour {
                return Err("non-rumour thread has no veracity label".into());
            }
            let mis = a.get("misinformation");
            let tru = a.get("true");
            if mis.is_none() && tru.is_none() {
                return Err("annotation has no veracity label".into());
            }
            match (flag(mis), flag(tru)) {
                (Some(false) | None, Some(false) | None) => Ok(Label::Unverified),
                (Some(false) | None, Some(true)) => Ok(Label::True),
                (Some(true), Some(false) | None) => Ok(Label::False),
                (Some(true), Some(true)) => Err("annotation marks the rumour both true and false".into()),
            }
        }
    }
}

struct RawTweet {
    id: u64,
    text: String,
    created_at: i64,
    user: Option<UserProfile>,
}

impl RawTweet {
    fn into_tweet(self, parent_id: Option<u64>) -> Tweet {
        Tweet {
            id: self.id,
            text: self.text,
            created_at: self.created_at,
            parent_id,
            user: self.user,
        }
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn parse_timestamp(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => chrono::DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y")
            .or_else(|_| chrono::DateTime::parse_from_rfc3339(s))
            .ok()
            .map(|t| t.timestamp()),
        _ => None,
    }
}

fn parse_user(v: &Value) -> Option<UserProfile> {
    let obj = v.as_object()?;
    let count = |k: &str| obj.get(k).and_then(as_u64).unwrap_or(0);
    Some(UserProfile {
        tweet_count: count("statuses_count"),
        listed_count: count("listed_count"),
        followers: count("followers_count"),
        following: count("friends_count"),
        verified: flag(obj.get("verified")).unwrap_or(false),
    })
}

fn parse_tweet(v: &Value, path: &Path) -> std::result::Result<RawTweet, String> {
    let id = v
        .get("id_str")
        .or_else(|| v.get("id"))
        .and_then(as_u64)
        .ok_or_else(|| format!("{}: tweet has no id", path.display()))?;
    let text = v
        .get("full_text")
        .or_else(|| v.get("text"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned();
    let created_at = v
        .get("created_at")
        .and_then(parse_timestamp)
        .ok_or_else(|| format!("{}: missing or unparseable created_at", path.display()))?;
    let user = v.get("user").and_then(parse_user);
    Ok(RawTweet {
        id,
        text,
        created_at,
        user,
    })
}

/// Flatten the nested reply structure into `id -> parent`.
fn parse_structure(v: &Value) -> std::result::Result<HashMap<u64, Option<u64>>, String> {
    let root = v.as_object().filter(|o| o.len() == 1).ok_or("reply structure must have exactly one root")?;
    let mut parents = HashMap::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<(Option<u64>, &Value, Option<&str>)> = Vec::new();
    for (k, child) in root {
        stack.push((None, child, Some(k.as_str())));
    }
    while let Some((parent, node, key)) = stack.pop() {
        let me = match key {
            Some(k) => Some(k.trim().parse::<u64>().map_err(|_| format!("bad tweet id {k:?} in reply structure"))?),
            None => None,
        };
        if let Some(id) = me {
            if !seen.insert(id) {
                return Err(format!("tweet {id} appears twice in reply structure"));
            }
            parents.insert(id, parent);
        }
        let here = me.or(parent);
        match node {
            Value::Object(children) => {
                for (k, c) in children {
                    stack.push((here, c, Some(k.as_str())));
                }
            }
            Value::Array(items) => {
                for item in items {
                    let id = as_u64(item).ok_or("non-id leaf in reply structure")?;
                    if !seen.insert(id) {
                        return Err(format!("tweet {id} appears twice in reply structure"));
                    }
                    parents.insert(id, here);
                }
            }
            Value::Null => {}
            _ => return Err("unexpected value in reply structure".into()),
        }
    }
    Ok(parents)
}
