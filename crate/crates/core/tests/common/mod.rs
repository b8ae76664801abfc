//! Loop-based reference implementations, kept free of the library's tape so
//! they can serve as independent oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threadforge::data::AdjacencyStructure;
use threadforge::features::{FeatureMatrix, GraphSample};
use threadforge::models::{GatParams, GcnParams, MlpHead};
use threadforge::nn::Tensor2;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(t: &Tensor2) -> Mat {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn relu(a: &mut Mat) {
    for row in a {
        for x in row {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
    }
}

pub fn mean_rows(h: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; h[0].len()];
    for row in h {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    out.iter().map(|x| x / h.len() as f64).collect()
}

pub fn head(p: &MlpHead, pooled: &[f64]) -> Vec<f64> {
    let mut h = matmul(&vec![pooled.to_vec()], &to_mat(&p.w1));
    for (x, b) in h[0].iter_mut().zip(p.b1.data()) {
        *x += b;
    }
    relu(&mut h);
    let mut o = matmul(&h, &to_mat(&p.w2));
    for (x, b) in o[0].iter_mut().zip(p.b2.data()) {
        *x += b;
    }
    o.remove(0)
}

/// `D^-1/2 (A + I) D^-1/2` with `A[parent][child] = 1` and row-sum degrees.
pub fn dense_norm_adjacency(n: usize, edges: &[(usize, usize)], symmetric: bool) -> Mat {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for &(p, c) in edges {
        a[p][c] = 1.0;
        if symmetric {
            a[c][p] = 1.0;
        }
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (d[i] * d[j]).sqrt();
        }
    }
    a
}

pub fn gcn_oracle(f: &Mat, edges: &[(usize, usize)], p: &GcnParams) -> Vec<f64> {
    let a = dense_norm_adjacency(f.len(), edges, false);
    let mut h = f.clone();
    for w in &p.layers {
        h = matmul(&a, &matmul(&h, &to_mat(w)));
        relu(&mut h);
    }
    head(&p.head, &mean_rows(&h))
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.2 * x
    }
}

/// Attention neighbourhood: self, parent, children.
pub fn neighbourhood(n: usize, edges: &[(usize, usize)], i: usize) -> Vec<usize> {
    let mut out = vec![i];
    out.extend(edges.iter().filter(|e| e.1 == i).map(|e| e.0));
    out.extend(edges.iter().filter(|e| e.0 == i).map(|e| e.1));
    assert!(out.iter().all(|&j| j < n));
    out
}

pub fn gat_oracle(f: &Mat, edges: &[(usize, usize)], p: &GatParams) -> Vec<f64> {
    let n = f.len();
    let mut h = f.clone();
    for (l, heads) in p.layers.iter().enumerate() {
        let last = l + 1 == p.layers.len();
        let mut outs: Vec<Mat> = Vec::new();
        for hd in heads {
            let z = matmul(&h, &to_mat(&hd.w));
            let d = z[0].len();
            let a = hd.attn.data();
            let mut out = vec![vec![0.0; d]; n];
            for i in 0..n {
                let nb = neighbourhood(n, edges, i);
                let scores: Vec<f64> = nb
                    .iter()
                    .map(|&j| {
                        let mut s = 0.0;
                        for k in 0..d {
                            s += a[k] * z[i][k] + a[d + k] * z[j][k];
                        }
                        leaky(s)
                    })
                    .collect();
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let ex: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
                let tot: f64 = ex.iter().sum();
                for (e, &j) in nb.iter().enumerate() {
                    for k in 0..d {
                        out[i][k] += ex[e] / tot * z[j][k];
                    }
                }
            }
            outs.push(out);
        }
        h = if last {
            let k = outs.len() as f64;
            (0..n)
                .map(|i| (0..outs[0][0].len()).map(|c| outs.iter().map(|o| o[i][c]).sum::<f64>() / k).collect())
                .collect()
        } else {
            (0..n).map(|i| outs.iter().flat_map(|o| o[i].clone()).collect()).collect()
        };
        relu(&mut h);
    }
    head(&p.head, &mean_rows(&h))
}

pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|c| (rng.random_range(0..c), c)).collect()
}

pub fn random_sample(seed: u64, n: usize, m: usize, classes: usize) -> GraphSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_tree(&mut rng, n);
    let data = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    GraphSample {
        thread_id: format!("g{seed}"),
        features: FeatureMatrix {
            values: Tensor2::new(n, m, data).unwrap(),
        },
        graph: AdjacencyStructure {
            n,
            edges,
            node_order: (0..n as u64).collect(),
        },
        label: rng.random_range(0..classes),
    }
}

use threadforge::models::{forward_with_ids, GraphBatch, ModelConfig, ModelKind, ModelParams};
use threadforge::nn::{NodeId, Parameters, Tape};

pub fn random_config(kind: ModelKind, rng: &mut ChaCha8Rng, m: usize) -> ModelConfig {
    let mut c = ModelConfig::new(kind, m, rng.random_range(2..=3));
    c.layers = rng.random_range(1..=3);
    c.heads = rng.random_range(1..=3);
    c.hidden_dim = c.heads * rng.random_range(1..=3);
    c.mlp_hidden = rng.random_range(2..=5);
    c
}

/// Perturb every tensor so biases are non-zero too.
pub fn jitter(p: &mut ModelParams, rng: &mut ChaCha8Rng) {
    for t in p.tensors_mut() {
        for x in t.data_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
    }
}

fn batch_loss(tape: &mut Tape, params: &ModelParams, values: &[Tensor2], batch: &GraphBatch) -> (NodeId, Vec<NodeId>) {
    let ids: Vec<NodeId> = values.iter().map(|v| tape.param(v.clone())).collect();
    let logits = forward_with_ids(tape, params, &ids, batch).unwrap();
    (tape.cross_entropy(logits, &batch.labels).unwrap(), ids)
}

/// Max over all parameter entries of `|analytic - numeric| / max(|a|, |n|, 1e-6)`
/// with central differences of step `h`.
pub fn fd_max_rel_err(params: &ModelParams, batch: &GraphBatch, h: f64) -> f64 {
    let values: Vec<Tensor2> = params.named().into_iter().map(|(_, t)| t.clone()).collect();
    let mut tape = Tape::new();
    let (loss, ids) = batch_loss(&mut tape, params, &values, batch);
    let grads = tape.backward(loss).unwrap();
    let eval = |vals: &[Tensor2]| {
        let mut t = Tape::new();
        let (l, _) = batch_loss(&mut t, params, vals, batch);
        t.value(l).get(0, 0)
    };
    let mut worst: f64 = 0.0;
    for (k, v) in values.iter().enumerate() {
        for i in 0..v.data().len() {
            let mut plus = values.clone();
            plus[k].data_mut()[i] += h;
            let mut minus = values.clone();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let analytic = grads.get(ids[k]).unwrap().data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}
