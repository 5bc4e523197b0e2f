//! Graph data model, dataset ingestion, masking plans and subgraphs.

mod dataset;
mod tu;

pub use dataset::{Dataset, FeatureOptions, LabelSource, RawGraph};
pub use tu::{parse_tu_dataset, write_tu_dataset};

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An undirected simple graph with categorical node labels.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Optional edge
/// features are aligned with that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    node_labels: Vec<u32>,
    edge_labels: Option<Vec<u32>>,
    node_features: Option<Tensor>,
    edge_features: Option<Tensor>,
    graph_label: Option<usize>,
    adjacency: Vec<Vec<usize>>,
}

/// Unvalidated graph parts. [`GraphBuilder::build`] canonicalizes them.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub node_labels: Option<Vec<u32>>,
    pub edge_labels: Option<Vec<u32>>,
    pub node_features: Option<Tensor>,
    pub edge_features: Option<Tensor>,
    pub graph_label: Option<usize>,
}

impl GraphBuilder {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        GraphBuilder {
            node_count,
            edges,
            ..Default::default()
        }
    }

    pub fn labels(mut self, labels: Vec<u32>) -> Self {
        self.node_labels = Some(labels);
        self
    }

    pub fn features(mut self, features: Tensor) -> Self {
        self.node_features = Some(features);
        self
    }

    pub fn edge_features(mut self, features: Tensor) -> Self {
        self.edge_features = Some(features);
        self
    }

    pub fn edge_labels(mut self, labels: Vec<u32>) -> Self {
        self.edge_labels = Some(labels);
        self
    }

    pub fn graph_label(mut self, y: usize) -> Self {
        self.graph_label = Some(y);
        self
    }

    /// Validates indices, drops self-loops and duplicate undirected edges
    /// (with a warning) and sorts edges.
    pub fn build(self) -> Result<Graph> {
        let n = self.node_count;
        if n == 0 {
            return Err(Error::shape("graph must have at least one node"));
        }
        let node_labels = self.node_labels.unwrap_or_else(|| vec![0; n]);
        if node_labels.len() != n {
            return Err(Error::shape(format!(
                "{} node labels for {n} nodes",
                node_labels.len()
            )));
        }
        if let Some(f) = &self.node_features {
            if f.rows() != n {
                return Err(Error::shape(format!(
                    "{} feature rows for {n} nodes",
                    f.rows()
                )));
            }
        }
        let m = self.edges.len();
        if let Some(l) = &self.edge_labels {
            if l.len() != m {
                return Err(Error::shape("edge labels not aligned with edges"));
            }
        }
        if let Some(f) = &self.edge_features {
            if f.rows() != m {
                return Err(Error::shape("edge features not aligned with edges"));
            }
        }

        let mut seen = HashSet::new();
        let mut kept: Vec<(usize, usize, usize)> = Vec::with_capacity(m);
        let (mut loops, mut dups) = (0usize, 0usize);
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::Index { index: x, len: n });
                }
            }
            if u == v {
                loops += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                dups += 1;
                continue;
            }
            kept.push((key.0, key.1, i));
        }
        if loops > 0 {
            log::warn!("dropped {loops} self-loop(s)");
        }
        if dups > 0 {
            log::warn!("dropped {dups} duplicate edge(s)");
        }
        kept.sort_unstable();

        let edges: Vec<(usize, usize)> = kept.iter().map(|&(u, v, _)| (u, v)).collect();
        let order: Vec<usize> = kept.iter().map(|&(_, _, i)| i).collect();
        let edge_labels = self
            .edge_labels
            .map(|l| order.iter().map(|&i| l[i]).collect());
        let edge_features = self.edge_features.map(|f| f.select_rows(&order));

        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Ok(Graph {
            node_count: n,
            edges,
            node_labels,
            edge_labels,
            node_features: self.node_features,
            edge_features,
            graph_label: self.graph_label,
            adjacency,
        })
    }
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn node_labels(&self) -> &[u32] {
        &self.node_labels
    }

    pub fn edge_labels(&self) -> Option<&[u32]> {
        self.edge_labels.as_deref()
    }

    pub fn node_features(&self) -> Option<&Tensor> {
        self.node_features.as_ref()
    }

    pub fn edge_features(&self) -> Option<&Tensor> {
        self.edge_features.as_ref()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.node_features.as_ref().map(Tensor::cols)
    }

    pub fn graph_label(&self) -> Option<usize> {
        self.graph_label
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.node_count {
            return Err(Error::shape("feature rows must equal node count"));
        }
        self.node_features = Some(features);
        Ok(self)
    }

    pub fn with_edge_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.edges.len() {
            return Err(Error::shape("edge feature rows must equal edge count"));
        }
        self.edge_features = Some(features);
        Ok(self)
    }

    /// Renames node `v` to `perm[v]`, carrying labels and features along.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.node_count;
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..n).collect::<Vec<_>>() {
            return Err(Error::shape("not a permutation of the node set"));
        }
        let mut inv = vec![0; n];
        for (v, &p) in perm.iter().enumerate() {
            inv[p] = v;
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut b = GraphBuilder::new(n, edges).labels(inv.iter().map(|&v| self.node_labels[v]).collect());
        if let Some(f) = &self.node_features {
            b = b.features(f.select_rows(&inv));
        }
        b.edge_labels = self.edge_labels.clone();
        b.edge_features = self.edge_features.clone();
        b.graph_label = self.graph_label;
        b.build()
    }

    /// Disjoint union; returns the union and each part's node offset.
    pub fn disjoint_union(parts: &[&Graph]) -> Result<(Graph, Vec<usize>)> {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut edges = Vec::new();
        let mut labels = Vec::new();
        let mut n = 0;
        for g in parts {
            offsets.push(n);
            edges.extend(g.edges.iter().map(|&(u, v)| (u + n, v + n)));
            labels.extend_from_slice(&g.node_labels);
            n += g.node_count;
        }
        let mut b = GraphBuilder::new(n, edges).labels(labels);
        if parts.iter().all(|g| g.node_features.is_some()) && !parts.is_empty() {
            b = b.features(stack(parts.iter().map(|g| g.node_features.as_ref().unwrap()))?);
        }
        if parts.iter().all(|g| g.edge_features.is_some()) && !parts.is_empty() {
            b = b.edge_features(stack(parts.iter().map(|g| g.edge_features.as_ref().unwrap()))?);
        }
        Ok((b.build()?, offsets))
    }
}

fn stack<'a>(ts: impl Iterator<Item = &'a Tensor>) -> Result<Tensor> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for t in ts {
        if *cols.get_or_insert(t.cols()) != t.cols() {
            return Err(Error::shape("feature dimensions differ across graphs"));
        }
        rows += t.rows();
        values.extend_from_slice(t.values());
    }
    Tensor::matrix(rows, cols.unwrap_or(0), values)
}

/// Node subset selected for masking.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    masked_nodes: Vec<usize>,
    mask_rate: f64,
}

impl MaskPlan {
    /// Builds a plan from an explicit node list (sorted and deduplicated).
    pub fn from_nodes(nodes: impl IntoIterator<Item = usize>, mask_rate: f64) -> Self {
        let set: BTreeSet<usize> = nodes.into_iter().collect();
        MaskPlan {
            masked_nodes: set.into_iter().collect(),
            mask_rate,
        }
    }

    pub fn masked_nodes(&self) -> &[usize] {
        &self.masked_nodes
    }

    pub fn mask_rate(&self) -> f64 {
        self.mask_rate
    }

    pub fn len(&self) -> usize {
        self.masked_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked_nodes.is_empty()
    }

    /// Per-node flags for a graph of `n` nodes.
    pub fn flags(&self, n: usize) -> Vec<bool> {
        let mut f = vec![false; n];
        for &v in &self.masked_nodes {
            f[v] = true;
        }
        f
    }
}

/// Number of nodes masked for a given rate: `round(rate · n)`, at least 1.
pub fn mask_count(n: usize, rate: f64) -> usize {
    ((rate * n as f64).round() as usize).clamp(1, n.max(1))
}

/// Samples `round(rate · n)` (at least one) distinct nodes uniformly.
pub fn sample_mask(g: &Graph, rate: f64, rng_seed: u64) -> Result<MaskPlan> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Config(format!("mask rate {rate} must lie in (0, 1)")));
    }
    let n = g.node_count();
    let k = mask_count(n, rate);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let chosen = sample(&mut rng, n, k);
    Ok(MaskPlan::from_nodes(chosen, rate))
}

/// A node subset of a parent graph together with its internal edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    parent_nodes: Vec<usize>,
    induced_edges: Vec<(usize, usize)>,
    labels: Vec<u32>,
    features: Option<Tensor>,
}

impl Subgraph {
    pub fn parent_nodes(&self) -> &[usize] {
        &self.parent_nodes
    }

    pub fn induced_edges(&self) -> &[(usize, usize)] {
        &self.induced_edges
    }

    /// Labels of `parent_nodes`, in the same order.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> Option<&Tensor> {
        self.features.as_ref()
    }

    pub fn len(&self) -> usize {
        self.parent_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent_nodes.is_empty()
    }

    /// Adjacency lists in local indices (positions within `parent_nodes`).
    pub fn local_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.parent_nodes.len()];
        for &(u, v) in &self.induced_edges {
            let a = self.parent_nodes.binary_search(&u).expect("edge endpoint in subgraph");
            let b = self.parent_nodes.binary_search(&v).expect("edge endpoint in subgraph");
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Stable key built from the sorted node set, e.g. `"0-3-4"`.
    pub fn key(&self) -> String {
        let parts: Vec<String> = self.parent_nodes.iter().map(usize::to_string).collect();
        parts.join("-")
    }
}

/// The subgraph of `g` induced by `nodes`.
pub fn induced_subgraph(g: &Graph, nodes: &[usize]) -> Result<Subgraph> {
    if nodes.is_empty() {
        return Err(Error::shape("induced subgraph needs at least one node"));
    }
    if let Some(&bad) = nodes.iter().find(|&&v| v >= g.node_count()) {
        return Err(Error::Index {
            index: bad,
            len: g.node_count(),
        });
    }
    let set: BTreeSet<usize> = nodes.iter().copied().collect();
    let parent_nodes: Vec<usize> = set.iter().copied().collect();
    let mut induced_edges = Vec::new();
    for &u in &parent_nodes {
        for &v in g.neighbors(u) {
            if u < v && set.contains(&v) {
                induced_edges.push((u, v));
            }
        }
    }
    let labels = parent_nodes.iter().map(|&v| g.node_labels()[v]).collect();
    let features = g.node_features().map(|f| f.select_rows(&parent_nodes));
    Ok(Subgraph {
        parent_nodes,
        induced_edges,
        labels,
        features,
    })
}

/// True iff every node of `s` is reachable from the first one through
/// induced edges.
pub fn is_connected(s: &Subgraph) -> bool {
    if s.is_empty() {
        return false;
    }
    let adj = s.local_adjacency();
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    reached == adj.len()
}
