//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any blocking criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threadforge::data::{Dataset, Label, LabelScheme, Provenance, Thread, Tweet};
use threadforge::eval::{
    audit_fold, compute_metrics, early_cohort, loocv_folds, run_early_eval_with, run_loocv, run_loocv_with,
    AugmentVariant, ExperimentConfig, Schedule,
};
use threadforge::features::{EmbeddingProvider, GraphSample, DEFAULT_HASH_DIM};
use threadforge::models::{
    gat_forward, gcn_forward, normalize_adjacency, train, AdjacencyMode, GraphBatch, ModelKind, ModelParams,
};
use threadforge::mos::{
    augment_thread, oversample_dataset, oversample_label, plan_oversample, thread_stream, AugmentationStrategy,
    StrategyKind,
};
use threadforge::synthetic::{synthetic_dataset, Signal, SyntheticSpec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Suite {
    failed_blocking: usize,
}

impl Suite {
    fn run(&mut self, name: &str, blocking: bool, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > budget => Err(format!("{d}; took {elapsed:.1?}, budget {budget:?}")),
            r => r,
        };
        let tag = if blocking { "" } else { " [non-blocking]" };
        match result {
            Ok(detail) => println!("PASS  {name}{tag}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                println!("FAIL  {name}{tag}: {detail} ({elapsed:.2?})");
                if blocking {
                    self.failed_blocking += 1;
                }
            }
        }
    }
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for kind in [ModelKind::Gcn, ModelKind::Gat] {
        for case in 0..15u64 {
            let m = rng.random_range(1..=4);
            let graphs = rng.random_range(1..=3);
            let c = random_config(kind, &mut rng, m);
            let samples: Vec<GraphSample> = (0..graphs)
                .map(|g| random_sample(case * 10 + g, rng.random_range(1..=6), m, c.num_classes))
                .collect();
            let refs: Vec<&GraphSample> = samples.iter().collect();
            let batch = GraphBatch::new(&refs, c.adjacency).map_err(|e| e.to_string())?;
            let mut p = ModelParams::init(&c, case).map_err(|e| e.to_string())?;
            jitter(&mut p, &mut rng);
            let err = fd_max_rel_err(&p, &batch, 1e-5);
            worst = worst.max(err);
            cases += 1;
            ensure(err < 1e-4, format!("{kind} case {case}: max rel err {err:.3e}"))?;
        }
    }
    Ok(format!("{cases} instances, max rel err {worst:.2e}"))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f72_6163);
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::Gcn, ModelKind::Gat] {
        for case in 0..50u64 {
            let n = rng.random_range(1..=10);
            let m = rng.random_range(1..=6);
            let s = random_sample(5000 + case, n, m, 2);
            let mut p = ModelParams::init(&random_config(kind, &mut rng, m), case).map_err(|e| e.to_string())?;
            jitter(&mut p, &mut rng);
            let f = to_mat(&s.features.values);
            let (got, want) = match &p {
                ModelParams::Gcn(g) => (
                    gcn_forward(&s.features, &normalize_adjacency(&s.graph, AdjacencyMode::Directed), g),
                    gcn_oracle(&f, &s.graph.edges, g),
                ),
                ModelParams::Gat(g) => (gat_forward(&s.features, &s.graph, g), gat_oracle(&f, &s.graph.edges, g)),
            };
            let got = got.map_err(|e| e.to_string())?;
            for (a, b) in got.data().iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
            ensure(worst < 1e-10, format!("{kind} case {case}: |diff| {worst:.3e}"))?;
        }
    }
    Ok(format!("100 instances, max |diff| {worst:.2e}"))
}

fn mos_balance() -> Outcome {
    let spec = SyntheticSpec::new(
        LabelScheme::Binary,
        vec![
            ("e1".into(), vec![9, 3]),
            ("e2".into(), vec![5, 5]),
            ("e3".into(), vec![7, 0]),
        ],
        31,
    );
    let d = synthetic_dataset(&spec).map_err(|e| e.to_string())?;
    for kind in [StrategyKind::Random, StrategyKind::Nonrandom] {
        let (aug, _) = oversample_dataset(&d, &AugmentationStrategy::new(kind, 5), None).map_err(|e| e.to_string())?;
        let got: Vec<Vec<usize>> = ["e1", "e2", "e3"].iter().map(|e| aug.label_counts(e)).collect();
        ensure(
            got == [vec![9, 9], vec![5, 5], vec![7, 0]],
            format!("{kind}: counts {got:?}"),
        )?;
        let originals_kept = d.events.iter().all(|(e, ts)| aug.events[e][..ts.len()] == ts[..]);
        ensure(originals_kept, format!("{kind}: originals not retained verbatim"))?;
    }

    let plan = plan_oversample(458, 1163, 3, 1).map_err(|e| e.to_string())?;
    ensure(
        (plan.n_fold, plan.n_random, plan.len()) == (2, 247, 1163),
        format!("plan {:?}", (plan.n_fold, plan.n_random, plan.len())),
    )?;
    let mut big = SyntheticSpec::new(LabelScheme::Binary, vec![("ch".into(), vec![458, 0])], 2);
    big.min_replies = 0;
    big.max_replies = 1;
    let threads: Vec<Thread> = synthetic_dataset(&big).map_err(|e| e.to_string())?.events.remove("ch").unwrap();
    let strategy = AugmentationStrategy::new(StrategyKind::Nonrandom, 9);
    let (copies, _) = oversample_label(&threads, 1163, &strategy, None, 4).map_err(|e| e.to_string())?;
    let third = copies
        .iter()
        .filter(|t| matches!(t.provenance, Provenance::Augmented { fold: 3, .. }))
        .count();
    ensure(copies.len() == 1163 && third == 247, format!("{} copies, {third} third folds", copies.len()))?;
    Ok("{(9,3),(5,5),(7,0)} -> {(9,9),(5,5),(7,0)} for both variants; 458 -> 1163 = 2*458 + 247".into())
}

fn influence_selection() -> Outcome {
    let tweets = vec![
        Tweet { id: 1, text: "@USER HTTPURL".into(), created_at: 0, parent_id: None, user: None },
        Tweet { id: 2, text: "the earth is flat".into(), created_at: 10, parent_id: Some(1), user: None },
        Tweet { id: 3, text: "no way 😂".into(), created_at: 20, parent_id: Some(1), user: None },
    ];
    let t = Thread::new("fixture", "e", Label::Rumour, Provenance::Original, tweets).map_err(|e| e.to_string())?;
    let w = threadforge::mos::influence_weights(&t);
    ensure(w.weights == [0.0, 4.0, 2.0], format!("weights {:?}", w.weights))?;
    let strategy = AugmentationStrategy::new(StrategyKind::Nonrandom, 77);
    let mut counts = [0usize; 3];
    for fold in 0..10_000u32 {
        let mut rng = thread_stream(strategy.seed, &t.thread_id, fold);
        let (_, stats) = augment_thread(&t, &strategy, None, fold, &mut rng);
        for i in stats.selected {
            counts[i] += 1;
        }
    }
    let ratio = counts[1] as f64 / counts[2] as f64;
    ensure(counts[0] == 0, format!("zero-weight tweet picked {} times", counts[0]))?;
    ensure((ratio / 2.0 - 1.0).abs() <= 0.05, format!("ratio {ratio:.3} from {counts:?}"))?;
    Ok(format!("selections {counts:?}, ratio {ratio:.3}"))
}

fn multi_event(seed: u64) -> Dataset {
    let spec = SyntheticSpec::new(
        LabelScheme::Ternary,
        vec![
            ("a".into(), vec![6, 2, 1]),
            ("b".into(), vec![3, 3, 3]),
            ("c".into(), vec![1, 0, 5]),
            ("d".into(), vec![4, 4, 0]),
        ],
        seed,
    );
    synthetic_dataset(&spec).unwrap()
}

fn leakage_audit() -> Outcome {
    let d = multi_event(3);
    let mut folds_checked = 0;
    let mut train_threads = 0;
    for kind in [None, Some(StrategyKind::Random), Some(StrategyKind::Nonrandom)] {
        let aug = kind.map(|k| oversample_dataset(&d, &AugmentationStrategy::new(k, 1), None).unwrap().0);
        for fold in loocv_folds(&d, aug.as_ref()).map_err(|e| e.to_string())? {
            let leaks = audit_fold(&fold);
            ensure(leaks.is_empty(), format!("fold {} leaks {:?}", fold.test_event, leaks))?;
            folds_checked += 1;
            train_threads += fold.train_threads.len();
        }
    }
    Ok(format!("{folds_checked} folds, {train_threads} training threads scanned, 0 violations"))
}

fn quick_config(kind: ModelKind, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, seed);
    c.hidden_dim = 16;
    c.heads = 2;
    c.train.epochs = 20;
    c.train.batch_size = 32;
    c
}

fn early_identities() -> Outcome {
    let d = multi_event(8);
    let schedule = Schedule::default();
    for t in d.threads() {
        ensure(early_cohort(t, 0.0).tweets.len() == 1, format!("{}: delay 0 keeps replies", t.thread_id))?;
        let max_h = t.tweets.iter().map(|w| w.created_at - t.source().created_at).max().unwrap() as f64 / 3600.0;
        ensure(early_cohort(t, max_h) == *t, format!("{}: max delay drops tweets", t.thread_id))?;
        let mut prev: Vec<u64> = Vec::new();
        for &delay in schedule.delays() {
            let ids: Vec<u64> = early_cohort(t, delay).tweets.iter().map(|w| w.id).collect();
            ensure(prev.iter().all(|i| ids.contains(i)), format!("{}: not monotone at {delay}h", t.thread_id))?;
            prev = ids;
        }
    }
    let provider = EmbeddingProvider::hash_fallback(32);
    let cfg = quick_config(ModelKind::Gat, 12);
    let early = run_early_eval_with(&d, None, AugmentVariant::None, &provider, &cfg, &schedule).map_err(|e| e.to_string())?;
    let full = run_loocv_with(&d, None, AugmentVariant::None, &provider, &cfg).map_err(|e| e.to_string())?;
    for (c, f) in early.folds.iter().zip(&full.folds) {
        ensure(c.points.len() == 17, "schedule length")?;
        let last = c.points.last().unwrap().metrics.accuracy;
        ensure(
            last == f.metrics.accuracy,
            format!("fold {}: final checkpoint {last} vs full {}", f.test_event, f.metrics.accuracy),
        )?;
    }
    Ok(format!("{} threads, {} folds x 17 checkpoints", d.num_threads(), early.folds.len()))
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7472);
    for i in 0..1000 {
        let n = rng.random_range(1..200);
        let c = rng.random_range(2..=3);
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let m = compute_metrics(&p, &t, c).map_err(|e| e.to_string())?;
        ensure((m.micro_f1 - m.accuracy).abs() < 1e-12, format!("vector {i}: {} vs {}", m.micro_f1, m.accuracy))?;
    }
    let r = Label::Rumour.class_index();
    let nr = Label::NonRumour.class_index();
    let m = compute_metrics(&[r, nr, nr], &[r, r, nr], 2).map_err(|e| e.to_string())?;
    ensure(
        (m.accuracy - 2.0 / 3.0).abs() < 1e-15 && (m.macro_f1 - 2.0 / 3.0).abs() < 1e-15,
        format!("hand example acc {} macro {}", m.accuracy, m.macro_f1),
    )?;
    Ok("1000 vectors micro-F1 = accuracy; hand example acc 2/3, macro-F1 2/3".into())
}

fn end_to_end_smoke() -> Outcome {
    let d = synthetic_dataset(&SyntheticSpec::balanced_binary(200, 4, 2024)).map_err(|e| e.to_string())?;
    let provider = EmbeddingProvider::hash_fallback(DEFAULT_HASH_DIM);
    let samples: Vec<GraphSample> = d
        .threads()
        .map(|t| GraphSample::from_thread(t, &provider))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for kind in [ModelKind::Gcn, ModelKind::Gat] {
        let cfg = ExperimentConfig::new(kind, 7);
        let model = cfg.model_config(samples[0].features.m(), 2);
        let (params, history) = train(&samples, &model, &cfg.train).map_err(|e| e.to_string())?;
        let best = history.epochs.iter().map(|e| e.accuracy).fold(0.0, f64::max);
        let preds = threadforge::models::predict(&params, &model, &samples).map_err(|e| e.to_string())?;
        let fitted = preds.iter().zip(&samples).filter(|(p, s)| **p == s.label).count() as f64 / samples.len() as f64;
        ensure(
            history.epochs.len() == 100 && best.max(fitted) >= 0.95,
            format!("{kind}: best epoch accuracy {best:.3}, final fit {fitted:.3}"),
        )?;
        let a = run_loocv(&d, AugmentVariant::None, &provider, None, &cfg).map_err(|e| e.to_string())?;
        let b = run_loocv(&d, AugmentVariant::None, &provider, None, &cfg).map_err(|e| e.to_string())?;
        ensure(a == b, format!("{kind}: LOO-CV not deterministic"))?;
        ensure(a.folds.len() == 4, "fold count")?;
        notes.push(format!(
            "{kind} train acc {fitted:.3}, LOO-CV acc {:.3} macro-F1 {:.3}",
            a.aggregate.accuracy, a.aggregate.macro_f1
        ));
    }
    Ok(notes.join("; "))
}

fn directional_check() -> Outcome {
    let mut none_recall = 0.0;
    let mut mos_recall = 0.0;
    let seeds = 5;
    for seed in 0..seeds {
        let mut spec = SyntheticSpec::new(
            LabelScheme::Binary,
            vec![
                ("e1".into(), vec![30, 6]),
                ("e2".into(), vec![28, 5]),
                ("e3".into(), vec![32, 7]),
            ],
            100 + seed,
        );
        spec.signal = Signal::SourceOnly;
        spec.label_noise = 0.3;
        let d = synthetic_dataset(&spec).map_err(|e| e.to_string())?;
        let provider = EmbeddingProvider::hash_fallback(32);
        let cfg = quick_config(ModelKind::Gcn, seed);
        let minority = Label::NonRumour.class_index();
        let base = run_loocv(&d, AugmentVariant::None, &provider, None, &cfg).map_err(|e| e.to_string())?;
        let mos = run_loocv(&d, AugmentVariant::Nonrandom, &provider, None, &cfg).map_err(|e| e.to_string())?;
        none_recall += base.aggregate.per_class[minority].recall;
        mos_recall += mos.aggregate.per_class[minority].recall;
    }
    let (a, b) = (none_recall / seeds as f64, mos_recall / seeds as f64);
    ensure(b >= a, format!("minority recall none {a:.3} > nonrandom MOS {b:.3}"))?;
    Ok(format!("minority recall none {a:.3} <= nonrandom MOS {b:.3} over {seeds} seeds"))
}

fn main() {
    let mut suite = Suite { failed_blocking: 0 };
    let s = Duration::from_secs;
    suite.run("gradient correctness", true, s(30), gradient_correctness);
    suite.run("oracle equivalence", true, s(10), oracle_equivalence);
    suite.run("MOS balance exactness", true, s(10), mos_balance);
    suite.run("influence-score selection", true, s(5), influence_selection);
    suite.run("leakage audit", true, s(10), leakage_audit);
    suite.run("early-cohort identities", true, s(30), early_identities);
    suite.run("metric identities", true, s(5), metric_identities);
    suite.run("end-to-end smoke", true, s(300), end_to_end_smoke);
    suite.run("directional minority recall", false, s(300), directional_check);
    if suite.failed_blocking > 0 {
        println!("{} blocking criteria failed", suite.failed_blocking);
        std::process::exit(1);
    }
    println!("all blocking criteria passed");
}
