use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::Subgraph;

/// Per-node WL label sequences for iterations `0..=depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlEmbedding {
    depth: usize,
    /// `labels[v]` has length `depth + 1`.
    labels: Vec<Vec<u64>>,
}

impl WlEmbedding {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn node(&self, v: usize) -> &[u64] {
        &self.labels[v]
    }

    /// Labels of all nodes at iteration `i`.
    pub fn iteration(&self, i: usize) -> Vec<u64> {
        self.labels.iter().map(|seq| seq[i]).collect()
    }
}

/// Interns `(own label, sorted neighbour labels)` signatures to fresh ids.
///
/// Share one labeler across every subgraph whose embeddings are compared,
/// so equal ids mean equal WL unfoldings.
#[derive(Debug, Default)]
pub struct WlLabeler {
    table: HashMap<(u64, Vec<u64>), u64>,
    next: u64,
}

/// Refined ids are kept apart from raw input labels.
const REFINED_BASE: u64 = 1 << 40;

impl WlLabeler {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, own: u64, mut neigh: Vec<u64>) -> u64 {
        neigh.sort_unstable();
        let next = &mut self.next;
        *self.table.entry((own, neigh)).or_insert_with(|| {
            *next += 1;
            REFINED_BASE + *next
        })
    }

    /// WL refinement of `s` for `depth` iterations on its categorical labels.
    pub fn refine(&mut self, s: &Subgraph, depth: usize) -> WlEmbedding {
        let adj = s.local_adjacency();
        let mut current: Vec<u64> = s.labels().iter().map(|&l| l as u64).collect();
        let mut labels: Vec<Vec<u64>> = current.iter().map(|&l| vec![l]).collect();
        for _ in 0..depth {
            let next: Vec<u64> = (0..adj.len())
                .map(|v| {
                    let neigh = adj[v].iter().map(|&w| current[w]).collect();
                    self.intern(current[v], neigh)
                })
                .collect();
            for (seq, &l) in labels.iter_mut().zip(&next) {
                seq.push(l);
            }
            current = next;
        }
        WlEmbedding { depth, labels }
    }
}

/// WL refinement with a private labeler. Embeddings from separate calls are
/// not comparable; use [`WlLabeler`] for that.
pub fn wl_refine(s: &Subgraph, depth: usize) -> WlEmbedding {
    WlLabeler::new().refine(s, depth)
}

/// Normalized Hamming distance between two nodes' label sequences.
pub fn ground_distance(a: &WlEmbedding, u: usize, b: &WlEmbedding, v: usize) -> Result<f64> {
    if a.depth != b.depth {
        return Err(Error::shape(format!(
            "WL depths differ: {} vs {}",
            a.depth, b.depth
        )));
    }
    Ok(hamming(a.node(u), b.node(v)) as f64 / (a.depth + 1) as f64)
}

pub(crate) fn hamming(x: &[u64], y: &[u64]) -> usize {
    x.iter().zip(y).filter(|(p, q)| p != q).count()
}
