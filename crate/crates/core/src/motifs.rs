//! Motif export: DOT rendering, pattern keys and frequency tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::graph::Subgraph;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = FNV_OFFSET;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Key of a motif's labeled structure, stable across runs and datasets.
///
/// Two motifs share a key when WL refinement (run for as many rounds as
/// the motif has nodes) cannot tell them apart. For the small motifs found
/// here this matches isomorphism except for rare regular-graph cases.
pub fn pattern_key(s: &Subgraph) -> String {
    let adj = s.local_adjacency();
    let mut colors: Vec<u64> = s.labels().iter().map(|&l| fnv([u64::from(l)])).collect();
    for _ in 0..s.len() {
        colors = (0..adj.len())
            .map(|v| {
                let mut neigh: Vec<u64> = adj[v].iter().map(|&w| colors[w]).collect();
                neigh.sort_unstable();
                fnv(std::iter::once(colors[v]).chain(neigh))
            })
            .collect();
    }
    colors.sort_unstable();
    format!("n{}e{}-{:016x}", s.len(), s.induced_edges().len(), fnv(colors))
}

/// One undirected DOT graph block named `motif_<gid>_<mid>`.
pub fn motif_dot(graph_id: usize, motif_id: usize, s: &Subgraph) -> String {
    let mut out = format!("graph motif_{graph_id}_{motif_id} {{\n");
    for (v, l) in s.parent_nodes().iter().zip(s.labels()) {
        writeln!(out, "  v{v} [label=\"{l}\"];").unwrap();
    }
    for (u, v) in s.induced_edges() {
        writeln!(out, "  v{u} -- v{v};").unwrap();
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct PatternStats {
    size: usize,
    edges: usize,
    count: usize,
    graphs: BTreeSet<usize>,
    labels: String,
}

/// Occurrence counts of motif patterns over a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternTable {
    patterns: BTreeMap<String, PatternStats>,
}

impl PatternTable {
    pub fn add(&mut self, key: &str, s: &Subgraph, graph_id: usize) {
        let e = self.patterns.entry(key.to_string()).or_insert_with(|| {
            let mut labels: Vec<u32> = s.labels().to_vec();
            labels.sort_unstable();
            PatternStats {
                size: s.len(),
                edges: s.induced_edges().len(),
                labels: labels.iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
                ..Default::default()
            }
        });
        e.count += 1;
        e.graphs.insert(graph_id);
    }

    /// Distinct patterns.
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Motif occurrences.
    pub fn total(&self) -> usize {
        self.patterns.values().map(|p| p.count).sum()
    }

    pub fn count(&self, key: &str) -> usize {
        self.patterns.get(key).map_or(0, |p| p.count)
    }

    /// Fraction of `reference` keys that were discovered at least once.
    pub fn coverage(&self, reference: &[&str]) -> f64 {
        if reference.is_empty() {
            return 0.0;
        }
        let unique: BTreeSet<&str> = reference.iter().copied().collect();
        let hit = unique.iter().filter(|k| self.patterns.contains_key(**k)).count();
        hit as f64 / unique.len() as f64
    }

    /// Patterns by descending count: `pattern,size,edges,count,graphs,labels`.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, &PatternStats)> = self.patterns.iter().collect();
        rows.sort_by(|a, b| b.1.count.cmp(&a.1.count).then(a.0.cmp(b.0)));
        let mut out = String::from("pattern,size,edges,count,graphs,labels\n");
        for (k, p) in rows {
            writeln!(out, "{k},{},{},{},{},{}", p.size, p.edges, p.count, p.graphs.len(), p.labels).unwrap();
        }
        out
    }
}
