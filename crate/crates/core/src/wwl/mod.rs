//! Wasserstein Weisfeiler-Lehman similarity between small labelled subgraphs.
//!
//! Nodes are embedded by their categorical WL label sequences, compared
//! with a normalized Hamming ground distance, and the two node sets are
//! matched by an exact optimal transport plan with uniform marginals. The
//! resulting distance `W` becomes a similarity `exp(−λ·W)`.

mod transport;
mod wl;

pub use transport::{solve_transport, TransportPlan, TransportSolution};
pub use wl::{ground_distance, wl_refine, WlEmbedding, WlLabeler};

use std::collections::HashMap;

use parking_lot::RwLock;

use crate::error::{Error, Result};
use crate::graph::Subgraph;

/// Exact 1-Wasserstein distance between two WL embeddings.
///
/// Both embeddings must come from the same [`WlLabeler`] for label
/// equality to be meaningful.
pub fn wasserstein_distance(a: &WlEmbedding, b: &WlEmbedding) -> Result<(f64, TransportPlan)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::shape("wasserstein distance of an empty embedding"));
    }
    if a.depth() != b.depth() {
        return Err(Error::shape(format!(
            "WL depths differ: {} vs {}",
            a.depth(),
            b.depth()
        )));
    }
    let (n, m) = (a.len(), b.len());
    // integer Hamming costs; masses scaled by n·m become integers too
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| wl::hamming(a.node(i), b.node(j)) as f64))
        .collect();
    let sol = solve_transport(&cost, &vec![m as u64; n], &vec![n as u64; m])?;
    let scale = (n * m) as f64;
    let distance = sol.cost / (scale * (a.depth() + 1) as f64);
    let plan = TransportPlan {
        rows: n,
        cols: m,
        coupling: sol.flow.iter().map(|&f| f as f64 / scale).collect(),
    };
    Ok((distance, plan))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("lambda must be positive, got {lambda}")))
    }
}

/// `exp(−λ · W(wl(s1), wl(s2)))` with WL depth `depth`.
pub fn wwl_similarity(s1: &Subgraph, s2: &Subgraph, depth: usize, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mut labeler = WlLabeler::new();
    let e1 = labeler.refine(s1, depth);
    let e2 = labeler.refine(s2, depth);
    let (d, _) = wasserstein_distance(&e1, &e2)?;
    Ok((-lambda * d).exp())
}

/// Identity of a subgraph's content: node set, internal edges and labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubgraphKey {
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    labels: Vec<u32>,
}

impl SubgraphKey {
    pub fn of(s: &Subgraph) -> Self {
        SubgraphKey {
            nodes: s.parent_nodes().to_vec(),
            edges: s.induced_edges().to_vec(),
            labels: s.labels().to_vec(),
        }
    }
}

type PairKey = (SubgraphKey, SubgraphKey, usize, u64);

/// Shared similarity cache: concurrent reads, exclusive inserts.
#[derive(Debug, Default)]
pub struct WwlCache {
    map: RwLock<HashMap<PairKey, f64>>,
}

impl WwlCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(a: &SubgraphKey, b: &SubgraphKey, depth: usize, lambda: f64) -> PairKey {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        (x.clone(), y.clone(), depth, lambda.to_bits())
    }

    pub fn get(&self, a: &SubgraphKey, b: &SubgraphKey, depth: usize, lambda: f64) -> Option<f64> {
        self.map.read().get(&Self::key(a, b, depth, lambda)).copied()
    }

    pub fn insert(&self, a: &SubgraphKey, b: &SubgraphKey, depth: usize, lambda: f64, value: f64) {
        self.map.write().insert(Self::key(a, b, depth, lambda), value);
    }
}

/// Symmetric matrix of [`wwl_similarity`] over all pairs, unit diagonal.
///
/// Each unordered pair is solved once. With a cache, previously seen pairs
/// are reused and new ones inserted.
pub fn pairwise_kernel_matrix(
    subgraphs: &[Subgraph],
    depth: usize,
    lambda: f64,
    cache: Option<&WwlCache>,
) -> Result<Vec<Vec<f64>>> {
    check_lambda(lambda)?;
    if subgraphs.is_empty() {
        return Err(Error::shape("kernel matrix of an empty list"));
    }
    let k = subgraphs.len();
    let keys: Vec<SubgraphKey> = subgraphs.iter().map(SubgraphKey::of).collect();
    let mut labeler = WlLabeler::new();
    let mut embeddings: Vec<Option<WlEmbedding>> = vec![None; k];
    let mut out = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let cached = cache.and_then(|c| c.get(&keys[i], &keys[j], depth, lambda));
            let value = match cached {
                Some(v) => v,
                None => {
                    for idx in [i, j] {
                        if embeddings[idx].is_none() {
                            embeddings[idx] = Some(labeler.refine(&subgraphs[idx], depth));
                        }
                    }
                    let (d, _) = wasserstein_distance(
                        embeddings[i].as_ref().unwrap(),
                        embeddings[j].as_ref().unwrap(),
                    )?;
                    let v = (-lambda * d).exp();
                    if let Some(c) = cache {
                        c.insert(&keys[i], &keys[j], depth, lambda, v);
                    }
                    v
                }
            };
            out[i][j] = value;
            out[j][i] = value;
        }
    }
    Ok(out)
}
