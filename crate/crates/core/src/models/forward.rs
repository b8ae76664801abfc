use std::sync::Arc;

use super::batch::{gat_neighbourhoods, GraphBatch};
use super::params::{GatParams, GcnParams, ModelParams};
use crate::data::AdjacencyStructure;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::nn::{NodeId, Parameters, SparseMatrix, Tape, Tensor2};

const ATTENTION_SLOPE: f64 = 0.2;

fn gcn_layers(tape: &mut Tape, weights: &[NodeId], x: NodeId, adj: &Arc<SparseMatrix>) -> Result<NodeId> {
    let mut h = x;
    for &w in weights {
        let hw = tape.matmul(h, w)?;
        let agg = tape.sparse_matmul(adj.clone(), hw)?;
        h = tape.relu(agg);
    }
    Ok(h)
}

struct Edges {
    target: Arc<Vec<usize>>,
    source: Arc<Vec<usize>>,
    n: usize,
}

/// Returns the final node states and the attention coefficients of every
/// layer and head.
fn gat_layers(tape: &mut Tape, layers: &[Vec<(NodeId, NodeId)>], x: NodeId, e: &Edges) -> Result<(NodeId, Vec<Vec<NodeId>>)> {
    let mut h = x;
    let mut alphas = Vec::with_capacity(layers.len());
    for (l, heads) in layers.iter().enumerate() {
        let last = l + 1 == layers.len();
        let mut outs = Vec::with_capacity(heads.len());
        let mut layer_alpha = Vec::with_capacity(heads.len());
        for &(w, a) in heads {
            let z = tape.matmul(h, w)?;
            let d = tape.value(z).cols();
            let a_t = tape.slice_rows(a, 0, d)?;
            let a_s = tape.slice_rows(a, d, d)?;
            let s_t = tape.matmul(z, a_t)?;
            let s_s = tape.matmul(z, a_s)?;
            let g_t = tape.gather_rows(s_t, e.target.clone())?;
            let g_s = tape.gather_rows(s_s, e.source.clone())?;
            let score = tape.add(g_t, g_s)?;
            let score = tape.leaky_relu(score, ATTENTION_SLOPE);
            let alpha = tape.segment_softmax(score, e.target.clone(), e.n)?;
            let zs = tape.gather_rows(z, e.source.clone())?;
            let msg = tape.mul_col(alpha, zs)?;
            outs.push(tape.scatter_add_rows(msg, e.target.clone(), e.n)?);
            layer_alpha.push(alpha);
        }
        let combined = if last {
            let mut acc = outs[0];
            for &o in &outs[1..] {
                acc = tape.add(acc, o)?;
            }
            tape.scale(acc, 1.0 / outs.len() as f64)
        } else {
            tape.concat_cols(&outs)?
        };
        h = tape.relu(combined);
        alphas.push(layer_alpha);
    }
    Ok((h, alphas))
}

fn mlp_head(tape: &mut Tape, ids: &[NodeId], pooled: NodeId) -> Result<NodeId> {
    let [w1, b1, w2, b2] = ids else {
        return Err(Error::Invalid("classifier head needs four tensors".into()));
    };
    let h = tape.matmul(pooled, *w1)?;
    let h = tape.add_row(h, *b1)?;
    let h = tape.relu(h);
    let o = tape.matmul(h, *w2)?;
    tape.add_row(o, *b2)
}

fn split_gat(ids: &[NodeId], p: &GatParams) -> Vec<Vec<(NodeId, NodeId)>> {
    let mut it = ids.chunks(2);
    p.layers
        .iter()
        .map(|heads| heads.iter().map(|_| {
            let c = it.next().expect("two ids per head");
            (c[0], c[1])
        }).collect())
        .collect()
}

fn gat_param_count(p: &GatParams) -> usize {
    p.layers.iter().map(|h| 2 * h.len()).sum()
}

/// Record a forward pass over a batch. Returns the `n_graphs × C` logits and
/// the parameter node ids in `Parameters::named` order.
pub fn forward_batch(tape: &mut Tape, params: &ModelParams, batch: &GraphBatch) -> Result<(NodeId, Vec<NodeId>)> {
    let (logits, ids, _) = forward_inner(tape, params, batch)?;
    Ok((logits, ids))
}

fn forward_inner(
    tape: &mut Tape,
    params: &ModelParams,
    batch: &GraphBatch,
) -> Result<(NodeId, Vec<NodeId>, Vec<Vec<NodeId>>)> {
    let ids: Vec<NodeId> = params.named().into_iter().map(|(_, t)| tape.param(t.clone())).collect();
    let (logits, alphas) = forward_ids(tape, params, &ids, batch)?;
    Ok((logits, ids, alphas))
}

/// Like [`forward_batch`], with parameter values already on the tape as
/// `ids` (in `Parameters::named` order). `params` only supplies the layout.
pub fn forward_with_ids(tape: &mut Tape, params: &ModelParams, ids: &[NodeId], batch: &GraphBatch) -> Result<NodeId> {
    forward_ids(tape, params, ids, batch).map(|(l, _)| l)
}

fn forward_ids(
    tape: &mut Tape,
    params: &ModelParams,
    ids: &[NodeId],
    batch: &GraphBatch,
) -> Result<(NodeId, Vec<Vec<NodeId>>)> {
    if ids.len() != params.named().len() {
        return Err(Error::Invalid(format!(
            "{} parameter ids for {} tensors",
            ids.len(),
            params.named().len()
        )));
    }
    let x = tape.constant(batch.features.clone());
    let (h, body, alphas) = match params {
        ModelParams::Gcn(p) => {
            let l = p.layers.len();
            (gcn_layers(tape, &ids[..l], x, &batch.adjacency)?, l, Vec::new())
        }
        ModelParams::Gat(p) => {
            let body = gat_param_count(p);
            let edges = Edges {
                target: batch.att_target.clone(),
                source: batch.att_source.clone(),
                n: batch.num_nodes(),
            };
            let (h, alphas) = gat_layers(tape, &split_gat(&ids[..body], p), x, &edges)?;
            (h, body, alphas)
        }
    };
    let pooled = tape.segment_mean(h, batch.segments.clone(), batch.n_graphs)?;
    let logits = mlp_head(tape, &ids[body..], pooled)?;
    Ok((logits, alphas))
}

/// Column-wise mean over nodes.
pub fn pool_graph(h: &Tensor2) -> Result<Vec<f64>> {
    if h.rows() == 0 {
        return Err(Error::Invalid("cannot pool an empty graph".into()));
    }
    let mut out = vec![0.0; h.cols()];
    for r in 0..h.rows() {
        for (o, v) in out.iter_mut().zip(h.row(r)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= h.rows() as f64);
    Ok(out)
}

/// Logits (`1 × C`) of one graph given a precomputed propagation matrix.
pub fn gcn_forward(f: &FeatureMatrix, norm_a: &Tensor2, params: &GcnParams) -> Result<Tensor2> {
    if norm_a.rows() != f.n() || norm_a.cols() != f.n() {
        return Err(Error::Shape {
            op: "gcn_forward",
            left: norm_a.shape(),
            right: f.values.shape(),
        });
    }
    let mut tape = Tape::new();
    let ws: Vec<NodeId> = params.layers.iter().map(|w| tape.constant(w.clone())).collect();
    let head: Vec<NodeId> = [&params.head.w1, &params.head.b1, &params.head.w2, &params.head.b2]
        .into_iter()
        .map(|t| tape.constant(t.clone()))
        .collect();
    let x = tape.constant(f.values.clone());
    let h = gcn_layers(&mut tape, &ws, x, &Arc::new(SparseMatrix::from_dense(norm_a)))?;
    let pooled = tape.row_mean(h)?;
    let logits = mlp_head(&mut tape, &head, pooled)?;
    Ok(tape.value(logits).clone())
}

fn single_gat(f: &FeatureMatrix, a: &AdjacencyStructure, params: &GatParams) -> Result<(Tape, NodeId, Vec<Vec<NodeId>>)> {
    if a.n != f.n() || a.n == 0 {
        return Err(Error::Shape {
            op: "gat_forward",
            left: (a.n, a.n),
            right: f.values.shape(),
        });
    }
    let mut tape = Tape::new();
    let mut ids = Vec::new();
    for heads in &params.layers {
        for h in heads {
            ids.push(tape.constant(h.w.clone()));
            ids.push(tape.constant(h.attn.clone()));
        }
    }
    let head: Vec<NodeId> = [&params.head.w1, &params.head.b1, &params.head.w2, &params.head.b2]
        .into_iter()
        .map(|t| tape.constant(t.clone()))
        .collect();
    let (target, source): (Vec<usize>, Vec<usize>) = gat_neighbourhoods(a).into_iter().unzip();
    let edges = Edges {
        target: Arc::new(target),
        source: Arc::new(source),
        n: a.n,
    };
    let x = tape.constant(f.values.clone());
    let (h, alphas) = gat_layers(&mut tape, &split_gat(&ids, params), x, &edges)?;
    let pooled = tape.row_mean(h)?;
    let logits = mlp_head(&mut tape, &head, pooled)?;
    Ok((tape, logits, alphas))
}

/// Logits (`1 × C`) of one graph.
pub fn gat_forward(f: &FeatureMatrix, a: &AdjacencyStructure, params: &GatParams) -> Result<Tensor2> {
    let (tape, logits, _) = single_gat(f, a, params)?;
    Ok(tape.value(logits).clone())
}

/// Attention coefficients indexed `[layer][head][edge]`, with edges in
/// `gat_neighbourhoods` order.
pub fn gat_attention(f: &FeatureMatrix, a: &AdjacencyStructure, params: &GatParams) -> Result<Vec<Vec<Vec<f64>>>> {
    let (tape, _, alphas) = single_gat(f, a, params)?;
    Ok(alphas
        .iter()
        .map(|heads| heads.iter().map(|&id| tape.value(id).data().to_vec()).collect())
        .collect())
}
