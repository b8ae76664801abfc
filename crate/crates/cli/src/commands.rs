use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;
use threadforge::data::{ingest_pheme, validate_dataset};
use threadforge::eval::{run_early_eval_with, run_loocv_with};
use threadforge::features::{feature_width, DEFAULT_HASH_DIM};
use threadforge::models::{save_model, train, AdjacencyMode, ModelArtifact};
use threadforge::mos::oversample_dataset;
use threadforge::{
    normalize_tweet, AugmentVariant, CandidateTable, Dataset, EmbeddingProvider, EmbeddingTable, ExperimentConfig,
    GraphSample, LabelScheme, ModelKind, Schedule,
};

use crate::config::{resolve_seed, FileConfig};
use crate::manifest::{beside, Manifest};
use crate::plot;
use crate::{
    AugmentArgs, Cli, Command, EarlyEvalArgs, EmbeddingArgs, EvalArgs, IngestArgs, ModelArgs, ReportArgs,
    StrategyArgs, TrainArgs, UsageError, ValidateArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(a, &file),
        Command::Validate(a) => validate(a, &file),
        Command::Augment(a) => augment(a, &file),
        Command::Train(a) => train_cmd(a, &file),
        Command::Eval(a) => eval(a, &file),
        Command::EarlyEval(a) => early_eval(a, &file),
        Command::Report(a) => report(a),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| usage(format!("--{what}: {e}")))
}

fn required(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| usage(format!("--{name} is required (flag or config)")))
}

fn load_threads(path: &Path) -> Result<Dataset> {
    Dataset::load_jsonl(path).with_context(|| format!("loading threads from {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn ingest(a: IngestArgs, file: &FileConfig) -> Result<()> {
    let raw = required(&a.raw, &file.paths.raw, "raw")?;
    let out = required(&a.out, &file.paths.threads, "out")?;
    let scheme: LabelScheme = parse("scheme", &a.scheme)?;
    if !raw.is_dir() {
        bail!("{} is not a directory", raw.display());
    }
    let outcome = ingest_pheme(&raw, scheme)?;
    for s in &outcome.skips.skipped {
        eprintln!("skipped {} ({}): {}", s.path.display(), s.event, s.reason);
    }
    if outcome.dataset.events.is_empty() {
        bail!("no events found under {}", raw.display());
    }
    let d = &outcome.dataset;
    write(&out, &d.to_jsonl())?;
    eprintln!(
        "ingested {} threads from {} events, skipped {}",
        d.num_threads(),
        d.events.len(),
        outcome.skips.len()
    );
    Manifest::new("ingest", 0, &json!({ "scheme": scheme.as_str() }))?.write(
        &beside(&out),
        &[],
        std::slice::from_ref(&out),
    )
}

fn validate(a: ValidateArgs, file: &FileConfig) -> Result<()> {
    let input = required(&a.input, &file.paths.threads, "input")?;
    let d = load_threads(&input)?;
    let report = validate_dataset(&d);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        write(out, &text)?;
        Manifest::new("validate", 0, &json!({ "require_balanced": a.require_balanced }))?.write(
            &beside(out),
            std::slice::from_ref(&input),
            std::slice::from_ref(out),
        )?;
    }
    if !report.is_clean() {
        bail!(
            "{} violations, {} duplicate ids",
            report.violations.len(),
            report.duplicate_ids.len()
        );
    }
    if a.require_balanced && !report.is_balanced() {
        bail!("dataset is not label-balanced within every event");
    }
    Ok(())
}

/// Merge strategy and model settings from flags over the config file.
fn experiment(
    seed: u64,
    strategy: &StrategyArgs,
    model: &ModelArgs,
    file: &FileConfig,
) -> Result<(ExperimentConfig, AugmentVariant)> {
    let kind_s = model.model.clone().or_else(|| file.model.kind.clone());
    let kind: ModelKind = match kind_s {
        Some(s) => parse("model", &s)?,
        None => ModelKind::Gcn,
    };
    let mut cfg = ExperimentConfig::new(kind, seed);
    let variant: AugmentVariant = match strategy.variant.clone().or_else(|| file.augment.variant.clone()) {
        Some(s) => parse("variant", &s)?,
        None => AugmentVariant::None,
    };
    macro_rules! set {
        ($dst:expr, $flag:expr, $file:expr) => {
            if let Some(v) = $flag.or($file) {
                $dst = v;
            }
        };
    }
    set!(cfg.p_aug, strategy.p_aug, file.augment.p_aug);
    set!(cfg.fold_cap, strategy.fold_cap, file.augment.fold_cap);
    set!(cfg.token_rate, strategy.token_rate, file.augment.token_rate);
    set!(cfg.layers, model.layers, file.model.layers);
    set!(cfg.hidden_dim, model.hidden_dim, file.model.hidden_dim);
    set!(cfg.heads, model.heads, file.model.heads);
    set!(cfg.mlp_hidden, model.mlp_hidden, file.model.mlp_hidden);
    set!(cfg.train.epochs, model.epochs, file.train.epochs);
    set!(cfg.train.batch_size, model.batch_size, file.train.batch_size);
    set!(cfg.train.optimizer.lr, model.lr, file.train.lr);
    set!(cfg.train.optimizer.weight_decay, model.weight_decay, file.train.weight_decay);
    if let Some(s) = model.adjacency.clone().or_else(|| file.model.adjacency.clone()) {
        cfg.adjacency = match s.as_str() {
            "directed" => AdjacencyMode::Directed,
            "symmetrized" => AdjacencyMode::Symmetrized,
            other => return Err(usage(format!("--adjacency: unknown mode {other:?}"))),
        };
    }
    cfg.train.seed = seed;
    cfg.model_config(1, 2)
        .validate()
        .and_then(|_| cfg.train.validate())
        .and_then(|_| cfg.strategy(threadforge::StrategyKind::Random).validate())
        .map_err(|e| usage(e.to_string()))?;
    Ok((cfg, variant))
}

fn load_candidates(strategy: &StrategyArgs, file: &FileConfig) -> Result<Option<(PathBuf, CandidateTable)>> {
    match strategy.candidates.clone().or_else(|| file.paths.candidates.clone()) {
        None => Ok(None),
        Some(p) => {
            let t = CandidateTable::load(&p).with_context(|| format!("loading candidates {}", p.display()))?;
            Ok(Some((p, t)))
        }
    }
}

/// Provider plus the embedding file it read, if any. A file-backed
/// provider refuses to start when any tweet text is missing from the
/// table, unless hashed fallback is allowed.
fn provider(
    a: &EmbeddingArgs,
    file: &FileConfig,
    datasets: &[&Dataset],
) -> Result<(EmbeddingProvider, Option<PathBuf>, serde_json::Value)> {
    let fallback = a.fallback_hash || file.eval.fallback_hash.unwrap_or(false);
    match a.emb.clone().or_else(|| file.paths.embeddings.clone()) {
        None => {
            let dim = a.hash_dim.or(file.eval.hash_dim).unwrap_or(DEFAULT_HASH_DIM);
            if dim == 0 {
                return Err(usage("--hash-dim must be positive"));
            }
            Ok((
                EmbeddingProvider::hash_fallback(dim),
                None,
                json!({ "kind": "hash", "dim": dim }),
            ))
        }
        Some(path) => {
            let table = EmbeddingTable::load(&path).with_context(|| format!("loading embeddings {}", path.display()))?;
            let missing: BTreeSet<u64> = datasets
                .iter()
                .flat_map(|d| d.threads())
                .flat_map(|t| t.tweets.iter())
                .map(|tw| normalize_tweet(&tw.text).text_key())
                .filter(|k| table.get(*k).is_none())
                .collect();
            if !missing.is_empty() {
                if !fallback {
                    bail!(
                        "{} text keys missing from embedding table {} (pass --fallback-hash to hash them)",
                        missing.len(),
                        path.display()
                    );
                }
                eprintln!("{} text keys missing from the embedding table, hashing them", missing.len());
            }
            let dim = table.dim();
            let info = json!({ "kind": "file", "dim": dim, "fallback_hash": fallback });
            Ok((
                EmbeddingProvider::FileBacked {
                    table,
                    fallback_on_miss: fallback,
                },
                Some(path),
                info,
            ))
        }
    }
}

fn augment(a: AugmentArgs, file: &FileConfig) -> Result<()> {
    let input = required(&a.input, &file.paths.threads, "input")?;
    let out = required(&a.out, &file.paths.augmented, "out")?;
    let seed = resolve_seed(a.seed, file)?;
    let (cfg, variant) = experiment(seed, &a.strategy, &ModelArgs::default(), file)?;
    let Some(kind) = variant.strategy_kind() else {
        return Err(usage("augment needs --variant random or nonrandom"));
    };
    let candidates = load_candidates(&a.strategy, file)?;
    let d = load_threads(&input)?.originals();
    let strategy = cfg.strategy(kind);
    let (aug, report) = oversample_dataset(&d, &strategy, candidates.as_ref().map(|c| &c.1))?;
    write(&out, &aug.to_jsonl())?;
    eprintln!(
        "{} originals -> {} threads; {} tweets substituted, {} left unchanged, {} tokens replaced",
        d.num_threads(),
        aug.num_threads(),
        report.substituted_tweets,
        report.unchanged_tweets,
        report.substituted_tokens
    );
    let mut inputs = vec![input];
    inputs.extend(candidates.map(|c| c.0));
    let config = json!({ "variant": variant, "strategy": strategy, "counts": report.counts });
    Manifest::new("augment", seed, &config)?.write(&beside(&out), &inputs, std::slice::from_ref(&out))
}

fn train_cmd(a: TrainArgs, file: &FileConfig) -> Result<()> {
    let input = required(&a.input, &file.paths.threads, "input")?;
    let out = required(&a.out, &file.paths.out_dir.as_ref().map(|d| d.join("model.ckpt")), "out")?;
    let seed = resolve_seed(a.seed, file)?;
    let (cfg, _) = experiment(seed, &StrategyArgs::default(), &a.model, file)?;
    let d = load_threads(&input)?;
    let (prov, emb_path, emb_info) = provider(&a.emb, file, &[&d])?;
    let samples = d
        .threads()
        .map(|t| GraphSample::from_thread(t, &prov))
        .collect::<threadforge::Result<Vec<_>>>()?;
    if samples.is_empty() {
        bail!("{} holds no threads", input.display());
    }
    let model_cfg = cfg.model_config(feature_width(&prov), d.scheme.num_classes());
    let (params, history) = train(&samples, &model_cfg, &cfg.train)?;
    if let Some(last) = history.epochs.last() {
        eprintln!(
            "trained {} on {} threads: epoch {} loss {:.4} accuracy {:.4}",
            cfg.model,
            samples.len(),
            last.epoch,
            last.loss,
            last.accuracy
        );
    }
    let mut artifact = ModelArtifact::new(&model_cfg, &cfg.train);
    artifact.training_threads = samples.iter().map(|s| s.thread_id.clone()).collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_model(&out, &params, &artifact)?;
    let mut side = out.clone().into_os_string();
    side.push(".json");
    let mut inputs = vec![input];
    inputs.extend(emb_path);
    let config = json!({ "model": model_cfg, "train": cfg.train, "embeddings": emb_info });
    Manifest::new("train", seed, &config)?.write(&beside(&out), &inputs, &[out.clone(), PathBuf::from(side)])
}

/// Everything `eval` and `early-eval` share up to the actual run.
struct EvalSetup {
    originals: Dataset,
    augmented: Option<Dataset>,
    variant: AugmentVariant,
    cfg: ExperimentConfig,
    provider: EmbeddingProvider,
    out_dir: PathBuf,
    seed: u64,
    inputs: Vec<PathBuf>,
    config: serde_json::Value,
}

fn eval_setup(a: &EvalArgs, file: &FileConfig) -> Result<EvalSetup> {
    let input = required(&a.input, &file.paths.threads, "input")?;
    let out_dir = required(&a.out_dir, &file.paths.out_dir, "out-dir")?;
    let seed = resolve_seed(a.seed, file)?;
    let (cfg, variant) = experiment(seed, &a.strategy, &a.model, file)?;
    let mut inputs = vec![input.clone()];
    let all = load_threads(&input)?;
    let originals = all.originals();
    let has_copies = originals.num_threads() != all.num_threads();
    let augmented = match (&a.augmented, variant.strategy_kind()) {
        (Some(_), None) => return Err(usage("--augmented needs --variant random or nonrandom")),
        (Some(p), Some(_)) => {
            inputs.push(p.clone());
            Some(load_threads(p)?)
        }
        (None, Some(_)) if has_copies => Some(all),
        (None, Some(kind)) => {
            let candidates = load_candidates(&a.strategy, file)?;
            inputs.extend(candidates.as_ref().map(|c| c.0.clone()));
            let (aug, _) = oversample_dataset(&originals, &cfg.strategy(kind), candidates.as_ref().map(|c| &c.1))?;
            Some(aug)
        }
        (None, None) => None,
    };
    let mut sources = vec![&originals];
    sources.extend(augmented.as_ref());
    let (provider, emb_path, emb_info) = provider(&a.emb, file, &sources)?;
    inputs.extend(emb_path);
    let config = json!({ "variant": variant, "experiment": cfg, "embeddings": emb_info });
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    Ok(EvalSetup {
        originals,
        augmented,
        variant,
        cfg,
        provider,
        out_dir,
        seed,
        inputs,
        config,
    })
}

fn eval(a: EvalArgs, file: &FileConfig) -> Result<()> {
    let s = eval_setup(&a, file)?;
    let report = run_loocv_with(&s.originals, s.augmented.as_ref(), s.variant, &s.provider, &s.cfg)?;
    let results = s.out_dir.join("results.tsv");
    let predictions = s.out_dir.join("predictions.tsv");
    let metrics = s.out_dir.join("metrics.json");
    write(&results, &report.results_table())?;
    write(&predictions, &report.predictions_table())?;
    write(&metrics, &(serde_json::to_string_pretty(&report.aggregate)? + "\n"))?;
    print!("{}", report.results_table());
    Manifest::new("eval", s.seed, &s.config)?.write(
        &s.out_dir.join("manifest.json"),
        &s.inputs,
        &[results, predictions, metrics],
    )
}

fn early_eval(a: EarlyEvalArgs, file: &FileConfig) -> Result<()> {
    let schedule = match a.schedule.clone().or_else(|| file.eval.schedule.clone()) {
        Some(d) => Schedule::new(d).map_err(|e| usage(format!("--schedule: {e}")))?,
        None => Schedule::default(),
    };
    let s = eval_setup(&a.eval, file)?;
    let report = run_early_eval_with(&s.originals, s.augmented.as_ref(), s.variant, &s.provider, &s.cfg, &schedule)?;
    let curve = s.out_dir.join("curve.tsv");
    write(&curve, &report.curve_table())?;
    for p in &report.aggregate {
        println!("{}\t{:.4}", p.delay_hours, p.metrics.accuracy);
    }
    let mut config = s.config;
    config["schedule"] = json!(schedule.delays());
    Manifest::new("early-eval", s.seed, &config)?.write(
        &s.out_dir.join("manifest.json"),
        &s.inputs,
        std::slice::from_ref(&curve),
    )
}

fn report(a: ReportArgs) -> Result<()> {
    let tables = a
        .curves
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .with_context(|| format!("reading {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let series = plot::parse_curves(&tables)?;
    write(&a.out, &plot::render_svg(&series))?;
    print!("{}", plot::summary(&series));
    Manifest::new("report", 0, &json!({}))?.write(&beside(&a.out), &a.curves, std::slice::from_ref(&a.out))
}
