//! Leave-one-event-out evaluation, metrics and early-detection curves.

mod early;
mod metrics;
mod run;

use std::collections::HashSet;

use crate::data::{Dataset, Thread};
use crate::error::{Error, Result};

pub use early::{early_cohort, Schedule, DEFAULT_DELAYS};
pub use metrics::{compute_metrics, ClassMetrics, Metrics};
pub use run::{
    run_early_eval, run_early_eval_with, run_loocv, run_loocv_with, AugmentVariant, CurvePoint, EarlyReport,
    ExperimentConfig, FoldCurve, FoldResult, LoocvReport, PredictionRecord,
};

#[derive(Debug, Clone)]
pub struct Fold {
    pub test_event: String,
    pub train_threads: Vec<Thread>,
    pub test_threads: Vec<Thread>,
}

/// One fold per event. Training takes every other event from `augmented`
/// (originals plus their copies) when given, else from `d`'s originals.
/// Test sets hold only the held-out event's originals.
pub fn loocv_folds(d: &Dataset, augmented: Option<&Dataset>) -> Result<Vec<Fold>> {
    if d.events.len() < 2 {
        return Err(Error::Invalid(format!(
            "leave-one-event-out needs at least two events, found {}",
            d.events.len()
        )));
    }
    let train_source = augmented.unwrap_or(d);
    if let Some(a) = augmented {
        if a.scheme != d.scheme {
            return Err(Error::Invalid("augmented dataset uses a different label scheme".into()));
        }
    }
    Ok(d.events
        .iter()
        .map(|(event, threads)| Fold {
            test_event: event.clone(),
            train_threads: train_source
                .events
                .iter()
                .filter(|(e, _)| *e != event)
                .flat_map(|(_, ts)| ts.iter())
                .filter(|t| augmented.is_some() || t.is_original())
                .cloned()
                .collect(),
            test_threads: threads.iter().filter(|t| t.is_original()).cloned().collect(),
        })
        .collect())
}

/// Training threads whose original (themselves or their augmentation
/// parent) is a test thread or whose event is the test event, plus any
/// augmented thread in the test set.
pub fn audit_fold(fold: &Fold) -> Vec<String> {
    let test_ids: HashSet<&str> = fold.test_threads.iter().map(|t| t.thread_id.as_str()).collect();
    let mut leaks: Vec<String> = fold
        .train_threads
        .iter()
        .filter(|t| t.event == fold.test_event || test_ids.contains(t.provenance.root_id(&t.thread_id)))
        .map(|t| t.thread_id.clone())
        .collect();
    leaks.extend(fold.test_threads.iter().filter(|t| !t.is_original()).map(|t| t.thread_id.clone()));
    leaks
}
