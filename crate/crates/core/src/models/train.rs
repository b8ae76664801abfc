use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::GraphBatch;
use super::forward::forward_batch;
use super::params::ModelParams;
use super::{ModelConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::features::GraphSample;
use crate::hash;
use crate::nn::{AdamState, Tape, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's threads.
    pub loss: f64,
    /// Accuracy of the pre-update predictions made during the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

fn check_samples(samples: &[GraphSample], config: &ModelConfig) -> Result<()> {
    for s in samples {
        if s.features.m() != config.input_dim {
            return Err(Error::Shape {
                op: "train",
                left: (s.features.n(), config.input_dim),
                right: s.features.values.shape(),
            });
        }
        if s.label >= config.num_classes {
            return Err(Error::Invalid(format!(
                "thread {} has class {} but the model has {} classes",
                s.thread_id, s.label, config.num_classes
            )));
        }
    }
    Ok(())
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch training with a seeded shuffle per epoch and one Adam step per
/// batch. Deterministic for a fixed seed.
pub fn train(samples: &[GraphSample], config: &ModelConfig, train: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    train.validate()?;
    if samples.is_empty() {
        return Err(Error::Invalid("no training threads".into()));
    }
    check_samples(samples, config)?;
    let mut params = ModelParams::init(config, hash::derive_seed(train.seed, &[b"params"]))?;
    let mut adam = AdamState::new(train.optimizer, &params);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut tape = Tape::new();

    for epoch in 0..train.epochs {
        let mut rng = hash::stream(train.seed, &[b"epoch", &(epoch as u64).to_le_bytes()]);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(train.batch_size).enumerate() {
            let refs: Vec<&GraphSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let batch = GraphBatch::new(&refs, config.adjacency)?;
            tape.reset();
            let (logits, ids) = forward_batch(&mut tape, &params, &batch)?;
            let loss = tape.cross_entropy(logits, &batch.labels)?;
            let lv = tape.value(loss).get(0, 0);
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let lg = tape.value(logits);
            correct += (0..lg.rows()).filter(|&r| argmax(lg.row(r)) == batch.labels[r]).count();
            loss_sum += lv * chunk.len() as f64;
            let grads = tape.backward(loss)?;
            let grads: Vec<Tensor2> = ids
                .iter()
                .map(|&id| grads.get(id).cloned().expect("every parameter has a gradient"))
                .collect();
            adam.step(&mut params, &grads)?;
        }
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / samples.len() as f64,
            accuracy: correct as f64 / samples.len() as f64,
        });
    }
    Ok((params, history))
}

const EVAL_CHUNK: usize = 128;

/// Class probabilities per sample, in input order.
pub fn predict_proba(params: &ModelParams, config: &ModelConfig, samples: &[GraphSample]) -> Result<Vec<Vec<f64>>> {
    check_samples(samples, config)?;
    let chunks: Vec<Vec<Vec<f64>>> = samples
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<&GraphSample> = chunk.iter().collect();
            let batch = GraphBatch::new(&refs, config.adjacency)?;
            let mut tape = Tape::new();
            let (logits, _) = forward_batch(&mut tape, params, &batch)?;
            let probs = tape.row_softmax(logits);
            Ok(tape.value(probs).to_rows())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Most probable class per sample (lowest index on ties).
pub fn predict(params: &ModelParams, config: &ModelConfig, samples: &[GraphSample]) -> Result<Vec<usize>> {
    Ok(predict_proba(params, config, samples)?.iter().map(|p| argmax(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AdjacencyStructure;
    use crate::features::FeatureMatrix;
    use crate::models::ModelKind;
    use crate::nn::{encode_checkpoint, Parameters};

    fn toy(n: usize) -> Vec<GraphSample> {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let nodes = 1 + i % 3;
                let mut v = Tensor2::zeros(nodes, 4);
                for r in 0..nodes {
                    v.set(r, label, 1.0);
                    v.set(r, 2 + (i + r) % 2, 0.5);
                }
                GraphSample {
                    thread_id: format!("t{i}"),
                    features: FeatureMatrix { values: v },
                    graph: AdjacencyStructure {
                        n: nodes,
                        edges: (1..nodes).map(|c| (0, c)).collect(),
                        node_order: (0..nodes as u64).collect(),
                    },
                    label,
                }
            })
            .collect()
    }

    fn small(kind: ModelKind) -> ModelConfig {
        let mut c = ModelConfig::new(kind, 4, 2);
        c.hidden_dim = 8;
        c.heads = 2;
        c.mlp_hidden = 8;
        c
    }

    #[test]
    fn zero_epochs_returns_init() {
        let c = small(ModelKind::Gcn);
        let t = TrainConfig {
            epochs: 0,
            seed: 3,
            ..TrainConfig::default()
        };
        let (p, h) = train(&toy(4), &c, &t).unwrap();
        assert!(h.epochs.is_empty());
        assert_eq!(p, ModelParams::init(&c, hash::derive_seed(3, &[b"params"])).unwrap());
    }

    #[test]
    fn learns_toy_and_is_deterministic() {
        for kind in [ModelKind::Gcn, ModelKind::Gat] {
            let c = small(kind);
            let t = TrainConfig {
                epochs: 60,
                batch_size: 8,
                seed: 1,
                ..TrainConfig::default()
            };
            let data = toy(24);
            let (p, h) = train(&data, &c, &t).unwrap();
            assert!(h.epochs.last().unwrap().accuracy >= 0.95, "{kind}: {:?}", h.epochs.last());
            let preds = predict(&p, &c, &data).unwrap();
            assert_eq!(preds, data.iter().map(|s| s.label).collect::<Vec<_>>());
            let (q, _) = train(&data, &c, &t).unwrap();
            assert_eq!(encode_checkpoint(p.named().iter().map(|(n, t)| (n.as_str(), *t))),
                       encode_checkpoint(q.named().iter().map(|(n, t)| (n.as_str(), *t))));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = small(ModelKind::Gcn);
        assert!(train(&[], &c, &TrainConfig::default()).is_err());
        let mut data = toy(2);
        data[0].label = 5;
        assert!(train(&data, &c, &TrainConfig::default()).is_err());
    }
}
