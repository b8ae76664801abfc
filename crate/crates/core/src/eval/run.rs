use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::early::{early_cohort, Schedule};
use super::metrics::{compute_metrics, Metrics};
use super::{audit_fold, loocv_folds, Fold};
use crate::data::{Dataset, LabelScheme, Thread};
use crate::error::{Error, Result};
use crate::features::{feature_width, EmbeddingProvider, GraphSample};
use crate::hash;
use crate::models::{self, AdjacencyMode, ModelConfig, ModelKind, ModelParams, TrainConfig, TrainHistory};
use crate::mos::{oversample_dataset, AugmentationStrategy, CandidateTable, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentVariant {
    None,
    Random,
    Nonrandom,
}

impl AugmentVariant {
    pub fn strategy_kind(self) -> Option<StrategyKind> {
        match self {
            AugmentVariant::None => None,
            AugmentVariant::Random => Some(StrategyKind::Random),
            AugmentVariant::Nonrandom => Some(StrategyKind::Nonrandom),
        }
    }
}

impl std::fmt::Display for AugmentVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AugmentVariant::None => "none",
            AugmentVariant::Random => "random",
            AugmentVariant::Nonrandom => "nonrandom",
        })
    }
}

impl std::str::FromStr for AugmentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AugmentVariant::None),
            other => other.parse::<StrategyKind>().map(|k| match k {
                StrategyKind::Random => AugmentVariant::Random,
                StrategyKind::Nonrandom => AugmentVariant::Nonrandom,
            }),
        }
    }
}

/// Everything an evaluation run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub layers: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub adjacency: AdjacencyMode,
    pub train: TrainConfig,
    pub p_aug: f64,
    pub fold_cap: u32,
    pub token_rate: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, seed: u64) -> Self {
        let m = ModelConfig::new(model, 1, 2);
        let s = AugmentationStrategy::new(StrategyKind::Random, 0);
        ExperimentConfig {
            model,
            layers: m.layers,
            hidden_dim: m.hidden_dim,
            heads: m.heads,
            mlp_hidden: m.mlp_hidden,
            adjacency: m.adjacency,
            train: TrainConfig::default(),
            p_aug: s.p_aug,
            fold_cap: s.fold_cap,
            token_rate: s.token_rate,
            seed,
        }
    }

    pub fn model_config(&self, input_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            kind: self.model,
            input_dim,
            num_classes,
            layers: self.layers,
            hidden_dim: self.hidden_dim,
            heads: self.heads,
            mlp_hidden: self.mlp_hidden,
            adjacency: self.adjacency,
        }
    }

    pub fn strategy(&self, kind: StrategyKind) -> AugmentationStrategy {
        AugmentationStrategy {
            kind,
            p_aug: self.p_aug,
            fold_cap: self.fold_cap,
            token_rate: self.token_rate,
            seed: hash::derive_seed(self.seed, &[b"mos"]),
        }
    }

    fn fold_train(&self, event: &str) -> TrainConfig {
        TrainConfig {
            seed: hash::derive_seed(self.seed, &[b"fold", event.as_bytes()]),
            ..self.train.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub fold: String,
    pub thread_id: String,
    pub truth: usize,
    pub pred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub test_event: String,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: Metrics,
    pub predictions: Vec<PredictionRecord>,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub variant: AugmentVariant,
    pub model: ModelKind,
    pub scheme: LabelScheme,
    pub folds: Vec<FoldResult>,
    /// Metrics over all folds' predictions pooled together.
    pub aggregate: Metrics,
}

fn fmt_metric_row(out: &mut String, variant: AugmentVariant, model: ModelKind, fold: &str, m: &Metrics) {
    let _ = writeln!(
        out,
        "{variant}\t{model}\t{fold}\t{:.6}\t{:.6}\t{:.6}",
        m.accuracy, m.micro_f1, m.macro_f1
    );
}

impl LoocvReport {
    /// Tab-separated `variant model fold accuracy micro_f1 macro_f1`, one
    /// row per fold and a final `aggregate` row.
    pub fn results_table(&self) -> String {
        let mut out = String::from("variant\tmodel\tfold\taccuracy\tmicro_f1\tmacro_f1\n");
        for f in &self.folds {
            fmt_metric_row(&mut out, self.variant, self.model, &f.test_event, &f.metrics);
        }
        fmt_metric_row(&mut out, self.variant, self.model, "aggregate", &self.aggregate);
        out
    }

    pub fn predictions_table(&self) -> String {
        let classes = self.scheme.classes();
        let mut out = String::from("fold\tthread_id\ttruth\tpred\n");
        for p in self.folds.iter().flat_map(|f| &f.predictions) {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                p.fold,
                p.thread_id,
                classes[p.truth].as_str(),
                classes[p.pred].as_str()
            );
        }
        out
    }

    pub fn all_predictions(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.folds.iter().flat_map(|f| &f.predictions)
    }
}

fn samples(threads: &[Thread], provider: &EmbeddingProvider) -> Result<Vec<GraphSample>> {
    threads.par_iter().map(|t| GraphSample::from_thread(t, provider)).collect()
}

fn augment(
    d: &Dataset,
    variant: AugmentVariant,
    candidates: Option<&CandidateTable>,
    cfg: &ExperimentConfig,
) -> Result<Option<Dataset>> {
    match variant.strategy_kind() {
        None => Ok(None),
        Some(kind) => Ok(Some(oversample_dataset(&d.originals(), &cfg.strategy(kind), candidates)?.0)),
    }
}

fn checked_folds(d: &Dataset, augmented: Option<&Dataset>) -> Result<Vec<Fold>> {
    let folds = loocv_folds(d, augmented)?;
    for f in &folds {
        let leaks = audit_fold(f);
        if !leaks.is_empty() {
            return Err(Error::Invalid(format!(
                "fold {} leaks {} threads, e.g. {}",
                f.test_event,
                leaks.len(),
                leaks[0]
            )));
        }
        if f.train_threads.is_empty() || f.test_threads.is_empty() {
            return Err(Error::Invalid(format!("fold {} has an empty split", f.test_event)));
        }
    }
    Ok(folds)
}

struct Trained {
    params: ModelParams,
    config: ModelConfig,
    history: TrainHistory,
}

fn train_fold(fold: &Fold, scheme: LabelScheme, provider: &EmbeddingProvider, cfg: &ExperimentConfig) -> Result<Trained> {
    let config = cfg.model_config(feature_width(provider), scheme.num_classes());
    let train_samples = samples(&fold.train_threads, provider)?;
    let (params, history) = models::train(&train_samples, &config, &cfg.fold_train(&fold.test_event))?;
    Ok(Trained { params, config, history })
}

/// Leave-one-event-out run; augmentation (if any) is generated here from the
/// originals and only reaches training folds.
pub fn run_loocv(
    d: &Dataset,
    variant: AugmentVariant,
    provider: &EmbeddingProvider,
    candidates: Option<&CandidateTable>,
    cfg: &ExperimentConfig,
) -> Result<LoocvReport> {
    let augmented = augment(d, variant, candidates, cfg)?;
    run_loocv_with(d, augmented.as_ref(), variant, provider, cfg)
}

/// Leave-one-event-out run over a precomputed augmented dataset.
pub fn run_loocv_with(
    d: &Dataset,
    augmented: Option<&Dataset>,
    variant: AugmentVariant,
    provider: &EmbeddingProvider,
    cfg: &ExperimentConfig,
) -> Result<LoocvReport> {
    let folds = checked_folds(d, augmented)?;
    let results: Vec<FoldResult> = folds
        .par_iter()
        .map(|fold| {
            let trained = train_fold(fold, d.scheme, provider, cfg)?;
            let test = samples(&fold.test_threads, provider)?;
            let preds = models::predict(&trained.params, &trained.config, &test)?;
            let truth: Vec<usize> = test.iter().map(|s| s.label).collect();
            let metrics = compute_metrics(&preds, &truth, d.scheme.num_classes())?;
            Ok(FoldResult {
                test_event: fold.test_event.clone(),
                train_size: fold.train_threads.len(),
                test_size: fold.test_threads.len(),
                metrics,
                predictions: test
                    .iter()
                    .zip(&preds)
                    .map(|(s, &p)| PredictionRecord {
                        fold: fold.test_event.clone(),
                        thread_id: s.thread_id.clone(),
                        truth: s.label,
                        pred: p,
                    })
                    .collect(),
                history: trained.history,
            })
        })
        .collect::<Result<_>>()?;
    let (preds, truth): (Vec<usize>, Vec<usize>) =
        results.iter().flat_map(|f| &f.predictions).map(|p| (p.pred, p.truth)).unzip();
    Ok(LoocvReport {
        variant,
        model: cfg.model,
        scheme: d.scheme,
        aggregate: compute_metrics(&preds, &truth, d.scheme.num_classes())?,
        folds: results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delay_hours: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldCurve {
    pub test_event: String,
    pub points: Vec<CurvePoint>,
    /// Metrics on the uncut test threads.
    pub full: Metrics,
    pub truth: Vec<usize>,
    /// Predictions per delay, aligned with `truth`.
    pub cohort_predictions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyReport {
    pub variant: AugmentVariant,
    pub model: ModelKind,
    pub schedule: Schedule,
    pub folds: Vec<FoldCurve>,
    pub aggregate: Vec<CurvePoint>,
    pub full_aggregate: Metrics,
}

impl EarlyReport {
    /// Tab-separated `variant model fold delay_hours accuracy macro_f1`,
    /// per fold then `aggregate`.
    pub fn curve_table(&self) -> String {
        let mut out = String::from("variant\tmodel\tfold\tdelay_hours\taccuracy\tmacro_f1\n");
        let rows = self
            .folds
            .iter()
            .map(|f| (f.test_event.as_str(), &f.points))
            .chain(std::iter::once(("aggregate", &self.aggregate)));
        for (fold, points) in rows {
            for p in points {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{fold}\t{}\t{:.6}\t{:.6}",
                    self.variant, self.model, p.delay_hours, p.metrics.accuracy, p.metrics.macro_f1
                );
            }
        }
        out
    }
}

pub fn run_early_eval(
    d: &Dataset,
    variant: AugmentVariant,
    provider: &EmbeddingProvider,
    candidates: Option<&CandidateTable>,
    cfg: &ExperimentConfig,
    schedule: &Schedule,
) -> Result<EarlyReport> {
    let augmented = augment(d, variant, candidates, cfg)?;
    run_early_eval_with(d, augmented.as_ref(), variant, provider, cfg, schedule)
}

/// One model per fold (the same one `run_loocv_with` trains), scored on the
/// test threads cut at every delay of the schedule.
pub fn run_early_eval_with(
    d: &Dataset,
    augmented: Option<&Dataset>,
    variant: AugmentVariant,
    provider: &EmbeddingProvider,
    cfg: &ExperimentConfig,
    schedule: &Schedule,
) -> Result<EarlyReport> {
    let folds = checked_folds(d, augmented)?;
    let c = d.scheme.num_classes();
    let curves: Vec<FoldCurve> = folds
        .par_iter()
        .map(|fold| {
            let trained = train_fold(fold, d.scheme, provider, cfg)?;
            let full_samples = samples(&fold.test_threads, provider)?;
            let truth: Vec<usize> = full_samples.iter().map(|s| s.label).collect();
            let full_preds = models::predict(&trained.params, &trained.config, &full_samples)?;
            let mut points = Vec::with_capacity(schedule.len());
            let mut cohort_predictions = Vec::with_capacity(schedule.len());
            for &delay in schedule.delays() {
                let cut: Vec<Thread> = fold.test_threads.iter().map(|t| early_cohort(t, delay)).collect();
                let preds = models::predict(&trained.params, &trained.config, &samples(&cut, provider)?)?;
                points.push(CurvePoint {
                    delay_hours: delay,
                    metrics: compute_metrics(&preds, &truth, c)?,
                });
                cohort_predictions.push(preds);
            }
            Ok(FoldCurve {
                test_event: fold.test_event.clone(),
                points,
                full: compute_metrics(&full_preds, &truth, c)?,
                truth,
                cohort_predictions,
            })
        })
        .collect::<Result<_>>()?;

    let truth: Vec<usize> = curves.iter().flat_map(|f| f.truth.iter().copied()).collect();
    let aggregate = schedule
        .delays()
        .iter()
        .enumerate()
        .map(|(k, &delay)| {
            let preds: Vec<usize> = curves.iter().flat_map(|f| f.cohort_predictions[k].iter().copied()).collect();
            Ok(CurvePoint {
                delay_hours: delay,
                metrics: compute_metrics(&preds, &truth, c)?,
            })
        })
        .collect::<Result<_>>()?;
    let full_aggregate = pooled_from_confusions(curves.iter().map(|f| &f.full), c)?;
    Ok(EarlyReport {
        variant,
        model: cfg.model,
        schedule: schedule.clone(),
        folds: curves,
        aggregate,
        full_aggregate,
    })
}

fn pooled_from_confusions<'a>(ms: impl Iterator<Item = &'a Metrics>, c: usize) -> Result<Metrics> {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for m in ms {
        for (t, row) in m.confusion.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                preds.extend(std::iter::repeat_n(p, n));
                truth.extend(std::iter::repeat_n(t, n));
            }
        }
    }
    compute_metrics(&preds, &truth, c)
}
