//! Reverse-mode automatic differentiation over [`Tensor2`] values.
//!
//! Every primitive records its inputs on the [`Tape`] and computes its value
//! eagerly. [`Tape::backward`] walks the nodes in reverse insertion order,
//! which is a valid reverse topological order because a node can only
//! reference nodes created before it.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::Tensor2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

/// Constant sparse matrix as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn to_dense(&self) -> Tensor2 {
        let mut t = Tensor2::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            t.set(r, c, t.get(r, c) + v);
        }
        t
    }

    pub fn from_dense(t: &Tensor2) -> Self {
        let mut entries = Vec::new();
        for r in 0..t.rows() {
            for c in 0..t.cols() {
                if t.get(r, c) != 0.0 {
                    entries.push((r, c, t.get(r, c)));
                }
            }
        }
        SparseMatrix {
            rows: t.rows(),
            cols: t.cols(),
            entries,
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `x (n×c) + b (1×c)` broadcast over rows.
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    RowSoftmax(NodeId),
    /// Column-wise mean over rows: `n×c -> 1×c`.
    RowMean(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceRows(NodeId, usize),
    Sum(NodeId),
    /// Mean cross-entropy over rows; caches the softmax.
    CrossEntropy(NodeId, Arc<Vec<usize>>, Tensor2),
    SparseMatMul(Arc<SparseMatrix>, NodeId),
    GatherRows(NodeId, Arc<Vec<usize>>),
    ScatterAddRows(NodeId, Arc<Vec<usize>>),
    /// Softmax of an `m×1` column within groups.
    SegmentSoftmax(NodeId, Arc<Vec<usize>>),
    /// `a (m×1) ⊙ x (m×c)`, broadcast along columns.
    MulCol(NodeId, NodeId),
    /// Per-segment column-wise mean: `n×c -> s×c`.
    SegmentMean(NodeId, Arc<Vec<usize>>, Arc<Vec<usize>>),
}

#[derive(Debug)]
struct Node {
    value: Tensor2,
    op: Op,
    requires_grad: bool,
    is_param: bool,
}

/// Gradients of the loss with respect to each parameter node.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: BTreeMap<NodeId, Tensor2>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor2> {
        self.grads.get(&id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<NodeId, Tensor2> {
        self.grads
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn shape_err(op: &'static str, a: &Tensor2, b: &Tensor2) -> Error {
    Error::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drop every recorded node so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor2 {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor2, op: Op, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            is_param: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A constant input; receives no gradient.
    pub fn constant(&mut self, value: Tensor2) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
            is_param: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A trainable leaf; [`Tape::backward`] reports its gradient.
    pub fn param(&mut self, value: Tensor2) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
            is_param: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("add", x, y));
        }
        let mut v = x.clone();
        v.add_assign(y);
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err("add_row", xv, bv));
        }
        let mut v = xv.clone();
        for r in 0..v.rows() {
            for (o, b) in v.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(v, Op::AddRow(x, bias), &[x, bias]))
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> NodeId {
        let v = self.value(x).map(|a| a * s);
        self.push(v, Op::Scale(x, s), &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|a| a.max(0.0));
        self.push(v, Op::Relu(x), &[x])
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let v = self.value(x).map(|a| if a > 0.0 { a } else { slope * a });
        self.push(v, Op::LeakyRelu(x, slope), &[x])
    }

    pub fn row_softmax(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let mut v = xv.clone();
        for r in 0..v.rows() {
            softmax_in_place(v.row_mut(r));
        }
        self.push(v, Op::RowSoftmax(x), &[x])
    }

    pub fn row_mean(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(shape_err("row_mean", xv, xv));
        }
        let n = xv.rows() as f64;
        let mut out = vec![0.0; xv.cols()];
        for r in 0..xv.rows() {
            for (o, a) in out.iter_mut().zip(xv.row(r)) {
                *o += a;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        Ok(self.push(Tensor2::row_vector(out), Op::RowMean(x), &[x]))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]), self.value(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut v = Tensor2::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                v.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        Ok(self.push(v, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if start + len > xv.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                left: xv.shape(),
                right: (start, len),
            });
        }
        let v = Tensor2::new(len, xv.cols(), xv.data()[start * xv.cols()..(start + len) * xv.cols()].to_vec())?;
        Ok(self.push(v, Op::SliceRows(x, start), &[x]))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = Tensor2::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x), &[x])
    }

    /// Mean over rows of `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lv = self.value(logits);
        if lv.rows() != labels.len() || lv.rows() == 0 {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: lv.shape(),
                right: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= lv.cols()) {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: lv.shape(),
                right: (bad, 1),
            });
        }
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            softmax_in_place(probs.row_mut(r));
        }
        let v = Tensor2::scalar(loss / labels.len() as f64);
        Ok(self.push(v, Op::CrossEntropy(logits, Arc::new(labels.to_vec()), probs), &[logits]))
    }

    /// `s · x` for a constant sparse `s`.
    pub fn sparse_matmul(&mut self, s: Arc<SparseMatrix>, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if s.cols != xv.rows() {
            return Err(Error::Shape {
                op: "sparse_matmul",
                left: (s.rows, s.cols),
                right: xv.shape(),
            });
        }
        let mut v = Tensor2::zeros(s.rows, xv.cols());
        for &(r, c, w) in &s.entries {
            let src = xv.row(c);
            for (o, a) in v.row_mut(r).iter_mut().zip(src) {
                *o += w * a;
            }
        }
        Ok(self.push(v, Op::SparseMatMul(s, x), &[x]))
    }

    /// `out[e] = x[index[e]]`.
    pub fn gather_rows(&mut self, x: NodeId, index: Arc<Vec<usize>>) -> Result<NodeId> {
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::Shape {
                op: "gather_rows",
                left: xv.shape(),
                right: (bad, 1),
            });
        }
        let mut v = Tensor2::zeros(index.len(), xv.cols());
        for (e, &i) in index.iter().enumerate() {
            v.row_mut(e).copy_from_slice(xv.row(i));
        }
        Ok(self.push(v, Op::GatherRows(x, index), &[x]))
    }

    /// `out[index[e]] += x[e]`, with `out` having `n` rows.
    pub fn scatter_add_rows(&mut self, x: NodeId, index: Arc<Vec<usize>>, n: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if index.len() != xv.rows() || index.iter().any(|&i| i >= n) {
            return Err(Error::Shape {
                op: "scatter_add_rows",
                left: xv.shape(),
                right: (index.len(), n),
            });
        }
        let mut v = Tensor2::zeros(n, xv.cols());
        for (e, &i) in index.iter().enumerate() {
            for (o, a) in v.row_mut(i).iter_mut().zip(xv.row(e)) {
                *o += a;
            }
        }
        Ok(self.push(v, Op::ScatterAddRows(x, index), &[x]))
    }

    /// Softmax of column `x` restricted to entries sharing a group id.
    pub fn segment_softmax(&mut self, x: NodeId, groups: Arc<Vec<usize>>, n_groups: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.cols() != 1 || groups.len() != xv.rows() || groups.iter().any(|&g| g >= n_groups) {
            return Err(Error::Shape {
                op: "segment_softmax",
                left: xv.shape(),
                right: (groups.len(), n_groups),
            });
        }
        let mut max = vec![f64::NEG_INFINITY; n_groups];
        for (e, &g) in groups.iter().enumerate() {
            max[g] = max[g].max(xv.data()[e]);
        }
        let mut out: Vec<f64> = groups.iter().enumerate().map(|(e, &g)| (xv.data()[e] - max[g]).exp()).collect();
        let mut denom = vec![0.0; n_groups];
        for (e, &g) in groups.iter().enumerate() {
            denom[g] += out[e];
        }
        for (e, &g) in groups.iter().enumerate() {
            out[e] /= denom[g];
        }
        Ok(self.push(Tensor2::column_vector(out), Op::SegmentSoftmax(x, groups), &[x]))
    }

    pub fn mul_col(&mut self, a: NodeId, x: NodeId) -> Result<NodeId> {
        let (av, xv) = (self.value(a), self.value(x));
        if av.cols() != 1 || av.rows() != xv.rows() {
            return Err(shape_err("mul_col", av, xv));
        }
        let mut v = xv.clone();
        for r in 0..v.rows() {
            let s = av.data()[r];
            v.row_mut(r).iter_mut().for_each(|o| *o *= s);
        }
        Ok(self.push(v, Op::MulCol(a, x), &[a, x]))
    }

    /// Column-wise mean of the rows in each segment; every segment must be
    /// non-empty.
    pub fn segment_mean(&mut self, x: NodeId, segments: Arc<Vec<usize>>, n_segments: usize) -> Result<NodeId> {
        let xv = self.value(x);
        let mut counts = vec![0usize; n_segments];
        if segments.len() != xv.rows() {
            return Err(Error::Shape {
                op: "segment_mean",
                left: xv.shape(),
                right: (segments.len(), n_segments),
            });
        }
        for &s in segments.iter() {
            if s >= n_segments {
                return Err(Error::Shape {
                    op: "segment_mean",
                    left: xv.shape(),
                    right: (s, n_segments),
                });
            }
            counts[s] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::Invalid("segment_mean: empty segment".into()));
        }
        let mut v = Tensor2::zeros(n_segments, xv.cols());
        for (r, &s) in segments.iter().enumerate() {
            for (o, a) in v.row_mut(s).iter_mut().zip(xv.row(r)) {
                *o += a;
            }
        }
        for (s, &c) in counts.iter().enumerate() {
            v.row_mut(s).iter_mut().for_each(|o| *o /= c as f64);
        }
        Ok(self.push(v, Op::SegmentMean(x, segments, Arc::new(counts)), &[x]))
    }

    /// Gradients of the scalar `loss` with respect to every parameter node.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor2>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor2::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let nodes = &self.nodes;
            let mut acc = |id: NodeId, delta: Tensor2| {
                if !nodes[id.0].requires_grad {
                    return;
                }
                match &mut grads[id.0] {
                    Some(existing) => existing.add_assign(&delta),
                    slot => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {
                    // Parameters keep their gradient.
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                    if nodes[a.0].requires_grad {
                        acc(*a, g.matmul_t(bv)?);
                    }
                    if nodes[b.0].requires_grad {
                        acc(*b, av.t_matmul(&g)?);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddRow(x, b) => {
                    let mut gb = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        for (o, d) in gb.iter_mut().zip(g.row(r)) {
                            *o += d;
                        }
                    }
                    acc(*b, Tensor2::row_vector(gb));
                    acc(*x, g);
                }
                Op::Scale(x, s) => acc(*x, g.map(|d| d * s)),
                Op::Relu(x) => {
                    let xv = &nodes[x.0].value;
                    let mut d = g;
                    for (o, &a) in d.data_mut().iter_mut().zip(xv.data()) {
                        if a <= 0.0 {
                            *o = 0.0;
                        }
                    }
                    acc(*x, d);
                }
                Op::LeakyRelu(x, slope) => {
                    let xv = &nodes[x.0].value;
                    let mut d = g;
                    for (o, &a) in d.data_mut().iter_mut().zip(xv.data()) {
                        if a <= 0.0 {
                            *o *= slope;
                        }
                    }
                    acc(*x, d);
                }
                Op::RowSoftmax(x) => {
                    let y = &node.value;
                    let mut d = Tensor2::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (c, o) in d.row_mut(r).iter_mut().enumerate() {
                            *o = yr[c] * (gr[c] - dot);
                        }
                    }
                    acc(*x, d);
                }
                Op::RowMean(x) => {
                    let n = nodes[x.0].value.rows();
                    let row: Vec<f64> = g.data().iter().map(|d| d / n as f64).collect();
                    let mut d = Tensor2::zeros(n, row.len());
                    for r in 0..n {
                        d.row_mut(r).copy_from_slice(&row);
                    }
                    acc(*x, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let pv = &nodes[p.0].value;
                        let mut d = Tensor2::zeros(pv.rows(), pv.cols());
                        for r in 0..pv.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + pv.cols()]);
                        }
                        off += pv.cols();
                        acc(*p, d);
                    }
                }
                Op::SliceRows(x, start) => {
                    let xv = &nodes[x.0].value;
                    let mut d = Tensor2::zeros(xv.rows(), xv.cols());
                    let w = xv.cols();
                    d.data_mut()[start * w..start * w + g.data().len()].copy_from_slice(g.data());
                    acc(*x, d);
                }
                Op::Sum(x) => {
                    let (r, c) = nodes[x.0].value.shape();
                    acc(*x, Tensor2::filled(r, c, g.get(0, 0)));
                }
                Op::CrossEntropy(x, labels, probs) => {
                    let scale = g.get(0, 0) / labels.len() as f64;
                    let mut d = probs.clone();
                    for (r, &y) in labels.iter().enumerate() {
                        d.set(r, y, d.get(r, y) - 1.0);
                    }
                    d.scale_assign(scale);
                    acc(*x, d);
                }
                Op::SparseMatMul(s, x) => {
                    let xv = &nodes[x.0].value;
                    let mut d = Tensor2::zeros(xv.rows(), xv.cols());
                    for &(r, c, w) in &s.entries {
                        let src = g.row(r);
                        for (o, a) in d.row_mut(c).iter_mut().zip(src) {
                            *o += w * a;
                        }
                    }
                    acc(*x, d);
                }
                Op::GatherRows(x, index) => {
                    let xv = &nodes[x.0].value;
                    let mut d = Tensor2::zeros(xv.rows(), xv.cols());
                    for (e, &i) in index.iter().enumerate() {
                        for (o, a) in d.row_mut(i).iter_mut().zip(g.row(e)) {
                            *o += a;
                        }
                    }
                    acc(*x, d);
                }
                Op::ScatterAddRows(x, index) => {
                    let mut d = Tensor2::zeros(index.len(), g.cols());
                    for (e, &i) in index.iter().enumerate() {
                        d.row_mut(e).copy_from_slice(g.row(i));
                    }
                    acc(*x, d);
                }
                Op::SegmentSoftmax(x, groups) => {
                    let y = node.value.data();
                    let n_groups = groups.iter().max().map_or(0, |m| m + 1);
                    let mut dot = vec![0.0; n_groups];
                    for (e, &grp) in groups.iter().enumerate() {
                        dot[grp] += y[e] * g.data()[e];
                    }
                    let d: Vec<f64> = groups
                        .iter()
                        .enumerate()
                        .map(|(e, &grp)| y[e] * (g.data()[e] - dot[grp]))
                        .collect();
                    acc(*x, Tensor2::column_vector(d));
                }
                Op::MulCol(a, x) => {
                    let (av, xv) = (&nodes[a.0].value, &nodes[x.0].value);
                    if nodes[a.0].requires_grad {
                        let da: Vec<f64> = (0..xv.rows())
                            .map(|r| xv.row(r).iter().zip(g.row(r)).map(|(p, q)| p * q).sum())
                            .collect();
                        acc(*a, Tensor2::column_vector(da));
                    }
                    if nodes[x.0].requires_grad {
                        let mut d = g;
                        for r in 0..d.rows() {
                            let s = av.data()[r];
                            d.row_mut(r).iter_mut().for_each(|o| *o *= s);
                        }
                        acc(*x, d);
                    }
                }
                Op::SegmentMean(x, segments, counts) => {
                    let xv = &nodes[x.0].value;
                    let mut d = Tensor2::zeros(xv.rows(), xv.cols());
                    for (r, &s) in segments.iter().enumerate() {
                        let c = counts[s] as f64;
                        for (o, a) in d.row_mut(r).iter_mut().zip(g.row(s)) {
                            *o = a / c;
                        }
                    }
                    acc(*x, d);
                }
            }
        }

        let mut out = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_param {
                let (r, c) = node.value.shape();
                let g = grads[i].take().unwrap_or_else(|| Tensor2::zeros(r, c));
                out.insert(NodeId(i), g);
            }
        }
        Ok(Gradients { grads: out })
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
