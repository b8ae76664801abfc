use std::collections::HashMap;

use super::Thread;
use crate::error::{Error, Result};

/// Top-down propagation tree of one thread. Node `i` is `thread.tweets[i]`;
/// node 0 is the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyStructure {
    pub n: usize,
    /// Directed `(parent, child)` pairs, in child order.
    pub edges: Vec<(usize, usize)>,
    /// Tweet id of each node.
    pub node_order: Vec<u64>,
}

impl AdjacencyStructure {
    /// Parent node of each node; `None` for the source.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.n];
        for &(a, b) in &self.edges {
            p[b] = Some(a);
        }
        p
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            c[a].push(b);
        }
        c
    }

    /// Dense 0/1 matrix with `a[parent][child] = 1`.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for &(p, c) in &self.edges {
            a[p][c] = 1.0;
        }
        a
    }

    /// Relabel nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> AdjacencyStructure {
        let mut node_order = vec![0; self.n];
        for (i, &p) in perm.iter().enumerate() {
            node_order[p] = self.node_order[i];
        }
        let mut edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        edges.sort_by_key(|&(_, c)| c);
        AdjacencyStructure {
            n: self.n,
            edges,
            node_order,
        }
    }

    /// Single-node graph.
    pub fn singleton(id: u64) -> Self {
        AdjacencyStructure {
            n: 1,
            edges: Vec::new(),
            node_order: vec![id],
        }
    }
}

pub fn build_propagation_graph(thread: &Thread) -> Result<AdjacencyStructure> {
    thread.validate()?;
    let index: HashMap<u64, usize> = thread.tweets.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let mut edges = Vec::with_capacity(thread.tweets.len().saturating_sub(1));
    for (child, t) in thread.tweets.iter().enumerate().skip(1) {
        let parent = t
            .parent_id
            .and_then(|p| index.get(&p).copied())
            .ok_or_else(|| Error::InvalidThread {
                thread_id: thread.thread_id.clone(),
                tweet_id: t.id,
                message: "reply without a parent in the thread".into(),
            })?;
        edges.push((parent, child));
    }
    Ok(AdjacencyStructure {
        n: thread.tweets.len(),
        edges,
        node_order: thread.tweets.iter().map(|t| t.id).collect(),
    })
}
