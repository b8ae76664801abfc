use std::collections::BTreeMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{augment_thread, thread_stream, AugmentStats, AugmentationStrategy};
use super::candidates::CandidateTable;
use crate::data::{Dataset, Thread};
use crate::error::{Error, Result};
use crate::hash;

/// How `n` new threads are distributed over `n_label` originals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OversamplePlan {
    /// Whole rounds in which every original is augmented once.
    pub n_fold: usize,
    /// Extra augmentations of distinct threads after the whole rounds
    /// (`n mod n_label` unless the fold cap was hit).
    pub n_random: usize,
    /// Number of partial or capped rounds drawn by seeded sampling.
    pub extra_rounds: usize,
    /// `(thread index, fold)` for every copy, sorted.
    pub tasks: Vec<(usize, u32)>,
}

impl OversamplePlan {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

pub fn plan_oversample(n_label: usize, n: usize, fold_cap: u32, seed: u64) -> Result<OversamplePlan> {
    if n == 0 {
        return Ok(OversamplePlan {
            n_fold: 0,
            n_random: 0,
            extra_rounds: 0,
            tasks: Vec::new(),
        });
    }
    if n_label == 0 {
        return Err(Error::Invalid(format!("cannot create {n} augmented threads from zero originals")));
    }
    let n_fold = (n / n_label).min(fold_cap as usize);
    let mut folds = vec![n_fold as u32; n_label];
    let mut tasks: Vec<(usize, u32)> = (0..n_label)
        .flat_map(|i| (1..=n_fold as u32).map(move |f| (i, f)))
        .collect();
    let mut remaining = n - n_fold * n_label;
    let n_random = remaining;
    let mut round = 0usize;
    while remaining > 0 {
        let take = remaining.min(n_label);
        let mut rng = hash::stream(seed, &[b"extra-round", &(round as u64).to_le_bytes()]);
        for i in sample(&mut rng, n_label, take) {
            folds[i] += 1;
            tasks.push((i, folds[i]));
        }
        remaining -= take;
        round += 1;
    }
    tasks.sort_unstable();
    Ok(OversamplePlan {
        n_fold,
        n_random,
        extra_rounds: round,
        tasks,
    })
}

/// Produce exactly `n` augmented threads from `threads`, ordered by parent
/// then fold.
pub fn oversample_label(
    threads: &[Thread],
    n: usize,
    strategy: &AugmentationStrategy,
    candidates: Option<&CandidateTable>,
    seed: u64,
) -> Result<(Vec<Thread>, AugmentStats)> {
    strategy.validate()?;
    let plan = plan_oversample(threads.len(), n, strategy.fold_cap, seed)?;
    let results: Vec<(Thread, AugmentStats)> = plan
        .tasks
        .par_iter()
        .map(|&(i, fold)| {
            let t = &threads[i];
            let mut rng = thread_stream(seed, &t.thread_id, fold);
            augment_thread(t, strategy, candidates, fold, &mut rng)
        })
        .collect();
    let mut stats = AugmentStats::default();
    let mut out = Vec::with_capacity(results.len());
    for (t, s) in results {
        stats.merge(&s);
        out.push(t);
    }
    Ok((out, stats))
}

/// Per-event, per-label bookkeeping of one MOS run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MosReport {
    /// event -> label -> (original count, augmented count)
    pub counts: BTreeMap<String, BTreeMap<String, (usize, usize)>>,
    pub substituted_tweets: usize,
    pub unchanged_tweets: usize,
    pub substituted_tokens: usize,
}

/// Balance every event so each present label reaches the event's largest
/// label count. Originals are kept verbatim and first; augmented threads
/// follow, grouped by label. Absent labels stay absent.
pub fn oversample_dataset(
    d: &Dataset,
    strategy: &AugmentationStrategy,
    candidates: Option<&CandidateTable>,
) -> Result<(Dataset, MosReport)> {
    strategy.validate()?;
    let mut out = Dataset::new(d.scheme);
    let mut report = MosReport::default();
    for (event, threads) in &d.events {
        let originals: Vec<&Thread> = threads.iter().filter(|t| t.is_original()).collect();
        let mut by_label: Vec<Vec<Thread>> = vec![Vec::new(); d.scheme.num_classes()];
        for t in &originals {
            by_label[t.label.class_index()].push((*t).clone());
        }
        let n_max = by_label.iter().map(Vec::len).max().unwrap_or(0);
        let mut event_threads: Vec<Thread> = originals.iter().map(|t| (*t).clone()).collect();
        let entry = report.counts.entry(event.clone()).or_default();
        for (c, group) in by_label.iter().enumerate() {
            let label = d.scheme.classes()[c];
            if group.is_empty() {
                entry.insert(label.as_str().to_owned(), (0, 0));
                continue;
            }
            let seed = hash::derive_seed(strategy.seed, &[event.as_bytes(), label.as_str().as_bytes()]);
            let (aug, stats) = oversample_label(group, n_max - group.len(), strategy, candidates, seed)?;
            entry.insert(label.as_str().to_owned(), (group.len(), aug.len()));
            report.substituted_tweets += stats.substituted_tweets;
            report.unchanged_tweets += stats.unchanged_tweets;
            report.substituted_tokens += stats.substituted_tokens;
            event_threads.extend(aug);
        }
        out.events.insert(event.clone(), event_threads);
    }
    Ok((out, report))
}
