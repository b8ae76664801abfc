use std::sync::Arc;

use super::AdjacencyMode;
use crate::data::AdjacencyStructure;
use crate::error::{Error, Result};
use crate::features::GraphSample;
use crate::nn::{SparseMatrix, Tensor2};

/// Non-zero entries of `D^-1/2 (A + I) D^-1/2`, with `D` the row sums of
/// `A + I`. Row-major order.
pub fn normalized_entries(a: &AdjacencyStructure, mode: AdjacencyMode) -> Vec<(usize, usize, f64)> {
    let mut rows: Vec<Vec<usize>> = (0..a.n).map(|i| vec![i]).collect();
    for &(p, c) in &a.edges {
        rows[p].push(c);
        if mode == AdjacencyMode::Symmetrized {
            rows[c].push(p);
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    let deg: Vec<f64> = rows.iter().map(|r| r.len() as f64).collect();
    rows.iter()
        .enumerate()
        .flat_map(|(i, r)| {
            let deg = &deg;
            r.iter().map(move |&j| (i, j, 1.0 / (deg[i] * deg[j]).sqrt()))
        })
        .collect()
}

pub fn normalize_adjacency(a: &AdjacencyStructure, mode: AdjacencyMode) -> Tensor2 {
    let mut t = Tensor2::zeros(a.n, a.n);
    for (i, j, w) in normalized_entries(a, mode) {
        t.set(i, j, w);
    }
    t
}

/// Attention neighbourhood of every node: itself, its parent, its children.
/// Returned as `(target, source)` pairs grouped by target.
pub fn gat_neighbourhoods(a: &AdjacencyStructure) -> Vec<(usize, usize)> {
    let parents = a.parents();
    let children = a.children();
    let mut out = Vec::with_capacity(a.n + 2 * a.edges.len());
    for i in 0..a.n {
        out.push((i, i));
        if let Some(p) = parents[i] {
            out.push((i, p));
        }
        out.extend(children[i].iter().map(|&c| (i, c)));
    }
    out
}

/// Disjoint union of several graphs, ready for one forward pass.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub features: Tensor2,
    pub adjacency: Arc<SparseMatrix>,
    pub att_target: Arc<Vec<usize>>,
    pub att_source: Arc<Vec<usize>>,
    /// Graph index of every stacked node.
    pub segments: Arc<Vec<usize>>,
    pub n_graphs: usize,
    pub labels: Vec<usize>,
}

impl GraphBatch {
    pub fn new(samples: &[&GraphSample], mode: AdjacencyMode) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Invalid("empty graph batch".into()));
        };
        let m = first.features.m();
        let total: usize = samples.iter().map(|s| s.features.n()).sum();
        let mut features = Vec::with_capacity(total * m);
        let mut entries = Vec::new();
        let mut tgt = Vec::new();
        let mut src = Vec::new();
        let mut segments = Vec::with_capacity(total);
        let mut offset = 0;
        for (g, s) in samples.iter().enumerate() {
            if s.features.m() != m || s.features.n() != s.graph.n || s.graph.n == 0 {
                return Err(Error::Shape {
                    op: "graph_batch",
                    left: (s.graph.n, m),
                    right: s.features.values.shape(),
                });
            }
            features.extend_from_slice(s.features.values.data());
            entries.extend(normalized_entries(&s.graph, mode).into_iter().map(|(i, j, w)| (i + offset, j + offset, w)));
            for (i, j) in gat_neighbourhoods(&s.graph) {
                tgt.push(i + offset);
                src.push(j + offset);
            }
            segments.extend(std::iter::repeat_n(g, s.graph.n));
            offset += s.graph.n;
        }
        Ok(GraphBatch {
            features: Tensor2::new(total, m, features)?,
            adjacency: Arc::new(SparseMatrix {
                rows: total,
                cols: total,
                entries,
            }),
            att_target: Arc::new(tgt),
            att_source: Arc::new(src),
            segments: Arc::new(segments),
            n_graphs: samples.len(),
            labels: samples.iter().map(|s| s.label).collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}
