use rand::Rng;

use super::{ModelConfig, ModelKind};
use crate::error::{Error, Result};
use crate::hash;
use crate::nn::{Parameters, Tensor2};

fn glorot(rows: usize, cols: usize, seed: u64, name: &str) -> Tensor2 {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = hash::stream(seed, &[b"init", name.as_bytes()]);
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor2::new(rows, cols, data).expect("shape matches data")
}

/// One hidden ReLU layer followed by a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub w1: Tensor2,
    pub b1: Tensor2,
    pub w2: Tensor2,
    pub b2: Tensor2,
}

impl MlpHead {
    fn init(input: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        MlpHead {
            w1: glorot(input, hidden, seed, "head.w1"),
            b1: Tensor2::zeros(1, hidden),
            w2: glorot(hidden, classes, seed, "head.w2"),
            b2: Tensor2::zeros(1, classes),
        }
    }

    fn named(&self) -> [(String, &Tensor2); 4] {
        [
            ("head.w1".into(), &self.w1),
            ("head.b1".into(), &self.b1),
            ("head.w2".into(), &self.w2),
            ("head.b2".into(), &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor2; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub layers: Vec<Tensor2>,
    pub head: MlpHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub w: Tensor2,
    /// `[a_target; a_source]`, shape `2d × 1`.
    pub attn: Tensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    pub layers: Vec<Vec<GatHead>>,
    pub head: MlpHead,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Gcn(GcnParams),
    Gat(GatParams),
}

/// Per-head output width of GAT layer `l`.
pub(crate) fn gat_head_dim(config: &ModelConfig, l: usize) -> usize {
    if l + 1 == config.layers {
        config.hidden_dim
    } else {
        config.hidden_dim / config.heads
    }
}

impl ModelParams {
    /// Glorot-uniform weights (each tensor from its own seeded stream), zero
    /// biases.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let head = MlpHead::init(config.hidden_dim, config.mlp_hidden, config.num_classes, seed);
        Ok(match config.kind {
            ModelKind::Gcn => {
                let layers = (0..config.layers)
                    .map(|l| {
                        let fan_in = if l == 0 { config.input_dim } else { config.hidden_dim };
                        glorot(fan_in, config.hidden_dim, seed, &format!("gcn.{l}.w"))
                    })
                    .collect();
                ModelParams::Gcn(GcnParams { layers, head })
            }
            ModelKind::Gat => {
                let mut layers = Vec::with_capacity(config.layers);
                let mut fan_in = config.input_dim;
                for l in 0..config.layers {
                    let d = gat_head_dim(config, l);
                    let heads = (0..config.heads)
                        .map(|k| GatHead {
                            w: glorot(fan_in, d, seed, &format!("gat.{l}.{k}.w")),
                            attn: glorot(2 * d, 1, seed, &format!("gat.{l}.{k}.a")),
                        })
                        .collect();
                    layers.push(heads);
                    fan_in = config.hidden_dim;
                }
                ModelParams::Gat(GatParams { layers, head })
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gcn(_) => ModelKind::Gcn,
            ModelParams::Gat(_) => ModelKind::Gat,
        }
    }

    pub fn head(&self) -> &MlpHead {
        match self {
            ModelParams::Gcn(p) => &p.head,
            ModelParams::Gat(p) => &p.head,
        }
    }

    /// Overwrite every tensor from `(name, tensor)` pairs with matching
    /// names and shapes.
    pub fn load_named(&mut self, tensors: &[(String, Tensor2)]) -> Result<()> {
        let names: Vec<(String, (usize, usize))> =
            self.named().into_iter().map(|(n, t)| (n, t.shape())).collect();
        if names.len() != tensors.len() {
            return Err(Error::Invalid(format!(
                "checkpoint has {} tensors, model expects {}",
                tensors.len(),
                names.len()
            )));
        }
        for ((name, shape), (tn, t)) in names.iter().zip(tensors) {
            if name != tn || *shape != t.shape() {
                return Err(Error::Invalid(format!(
                    "checkpoint tensor {tn} {:?} does not match {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        for (slot, (_, t)) in self.tensors_mut().into_iter().zip(tensors) {
            *slot = t.clone();
        }
        Ok(())
    }
}

impl Parameters for ModelParams {
    fn named(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        match self {
            ModelParams::Gcn(p) => {
                for (l, w) in p.layers.iter().enumerate() {
                    out.push((format!("gcn.{l}.w"), w));
                }
                out.extend(p.head.named());
            }
            ModelParams::Gat(p) => {
                for (l, heads) in p.layers.iter().enumerate() {
                    for (k, h) in heads.iter().enumerate() {
                        out.push((format!("gat.{l}.{k}.w"), &h.w));
                        out.push((format!("gat.{l}.{k}.a"), &h.attn));
                    }
                }
                out.extend(p.head.named());
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = Vec::new();
        match self {
            ModelParams::Gcn(p) => {
                out.extend(p.layers.iter_mut());
                out.extend(p.head.tensors_mut());
            }
            ModelParams::Gat(p) => {
                for heads in &mut p.layers {
                    for h in heads {
                        out.push(&mut h.w);
                        out.push(&mut h.attn);
                    }
                }
                out.extend(p.head.tensors_mut());
            }
        }
        out
    }
}
