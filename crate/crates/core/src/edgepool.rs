//! Learnable edge contraction, stacked coarsening and motif recovery.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{induced_subgraph, Graph, GraphBuilder, Subgraph};
use crate::tensor::{linear, Linear, ParamStore, Tape, Tensor, Var};
use crate::wwl::{pairwise_kernel_matrix, WwlCache};

/// How scored edges are turned into merge decisions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MergeMode {
    /// Merge iff the score exceeds a fresh uniform draw for that edge.
    #[default]
    Stochastic,
    /// One uniform draw per layer, shared by all of its edges.
    StochasticPerLayer,
    /// Merge iff the score exceeds a fixed threshold.
    Threshold(f64),
}

impl fmt::Display for MergeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeMode::Stochastic => write!(f, "stochastic"),
            MergeMode::StochasticPerLayer => write!(f, "stochastic-layer"),
            MergeMode::Threshold(t) => write!(f, "threshold:{t}"),
        }
    }
}

impl FromStr for MergeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "stochastic" => return Ok(MergeMode::Stochastic),
            "stochastic-layer" => return Ok(MergeMode::StochasticPerLayer),
            _ => {}
        }
        if let Some(t) = s.strip_prefix("threshold:") {
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad threshold in merge mode '{s}'")))?;
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("threshold {t} outside [0, 1]")));
            }
            return Ok(MergeMode::Threshold(t));
        }
        Err(Error::Config(format!(
            "unknown merge mode '{s}' (expected stochastic, stochastic-layer or threshold:<t>)"
        )))
    }
}

/// One EdgePool layer: `h^M_{u,v} = [h_u W_n, h_v W_n, x_e W_e] W`, averaged
/// over both orientations of the edge and scored by a sigmoid head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoolLayer {
    pub wn: Linear,
    pub we: Option<Linear>,
    pub w: Linear,
    pub score: Linear,
}

impl EdgePoolLayer {
    /// `edge_dim = 0` builds a layer without an edge term.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        edge_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let wn = Linear::init(store, &format!("{name}.wn"), in_dim, hidden, false, rng);
        let we = (edge_dim > 0)
            .then(|| Linear::init(store, &format!("{name}.we"), edge_dim, hidden, false, rng));
        let k_e = if we.is_some() { hidden } else { 0 };
        let w = Linear::init(store, &format!("{name}.w"), 2 * hidden + k_e, hidden, false, rng);
        let score = Linear::init(store, &format!("{name}.score"), hidden, 1, true, rng);
        EdgePoolLayer { wn, we, w, score }
    }

    pub fn find(store: &ParamStore, name: &str) -> Option<Self> {
        Some(EdgePoolLayer {
            wn: Linear::find(store, &format!("{name}.wn"))?,
            we: Linear::find(store, &format!("{name}.we")),
            w: Linear::find(store, &format!("{name}.w"))?,
            score: Linear::find(store, &format!("{name}.score"))?,
        })
    }

    pub fn in_dim(&self, store: &ParamStore) -> usize {
        self.wn.in_dim(store)
    }

    pub fn out_dim(&self, store: &ParamStore) -> usize {
        self.w.out_dim(store)
    }

    fn edge_width(&self, store: &ParamStore) -> usize {
        self.we.map_or(0, |we| we.out_dim(store))
    }

    fn edge_width_in(&self, store: &ParamStore) -> usize {
        self.we.map_or(0, |we| we.in_dim(store))
    }
}

/// Initializes `depth` layers named `pool.0`, `pool.1`, ...
pub fn init_layers<R: Rng>(
    store: &mut ParamStore,
    in_dim: usize,
    edge_dim: usize,
    hidden: usize,
    depth: usize,
    rng: &mut R,
) -> Vec<EdgePoolLayer> {
    (0..depth)
        .map(|j| {
            let d_in = if j == 0 { in_dim } else { hidden };
            EdgePoolLayer::init(store, &format!("pool.{j}"), d_in, edge_dim, hidden, rng)
        })
        .collect()
}

pub fn find_layers(store: &ParamStore) -> Vec<EdgePoolLayer> {
    let mut layers = Vec::new();
    while let Some(l) = EdgePoolLayer::find(store, &format!("pool.{}", layers.len())) {
        layers.push(l);
    }
    layers
}

/// Per-edge candidate representations and scores, aligned with `g.edges()`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeScores {
    /// `h · W_n`, one row per node.
    pub node_proj: Var,
    /// `h^M_{u,v}`, one row per edge; `None` without edges.
    pub candidates: Option<Var>,
    /// Sigmoid scores `[E × 1]`; `None` without edges.
    pub scores: Option<Var>,
}

impl EdgeScores {
    pub fn values(&self, tape: &Tape) -> Vec<f64> {
        self.scores.map_or_else(Vec::new, |s| tape.value(s).values().to_vec())
    }
}

pub fn score_edges(
    tape: &mut Tape,
    store: &ParamStore,
    g: &Graph,
    h: Var,
    layer: &EdgePoolLayer,
) -> Result<EdgeScores> {
    let n = g.node_count();
    if tape.value(h).rows() != n {
        return Err(Error::shape(format!(
            "{} representation rows for {n} nodes",
            tape.value(h).rows()
        )));
    }
    let node_proj = linear(tape, store, h, &layer.wn)?;
    if g.edge_count() == 0 {
        return Ok(EdgeScores {
            node_proj,
            candidates: None,
            scores: None,
        });
    }
    let us: Vec<usize> = g.edges().iter().map(|e| e.0).collect();
    let vs: Vec<usize> = g.edges().iter().map(|e| e.1).collect();
    let hu = tape.gather(node_proj, us)?;
    let hv = tape.gather(node_proj, vs)?;
    // mean of both orientations of [hu, hv, e]·W: edges are unordered
    let sum = tape.add(hu, hv)?;
    let mid = tape.affine(sum, 0.5, 0.0);
    let mut parts = vec![mid, mid];
    if let Some(we) = &layer.we {
        let e = edge_input(g, layer.edge_width_in(store))?;
        let ev = tape.constant(e);
        parts.push(linear(tape, store, ev, we)?);
    }
    let cat = tape.hcat(&parts)?;
    let cand = linear(tape, store, cat, &layer.w)?;
    let pre = linear(tape, store, cand, &layer.score)?;
    let scores = tape.sigmoid(pre);
    Ok(EdgeScores {
        node_proj,
        candidates: Some(cand),
        scores: Some(scores),
    })
}

/// Edge features of `g`, or zeros when the graph carries none.
fn edge_input(g: &Graph, width: usize) -> Result<Tensor> {
    match g.edge_features() {
        Some(f) if f.cols() == width => Ok(f.clone()),
        Some(f) => Err(Error::shape(format!(
            "edge features have width {}, layer expects {width}",
            f.cols()
        ))),
        None => Ok(Tensor::zeros(&[g.edge_count(), width])),
    }
}

/// A merged edge `(u, v)` of the layer input and the coarse node it became.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeEvent {
    pub edge: usize,
    pub u: usize,
    pub v: usize,
    pub into: usize,
}

/// Decisions of one contraction step.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub input_nodes: usize,
    pub output_nodes: usize,
    pub merges: Vec<MergeEvent>,
    /// `(input node, coarse node)` for nodes kept as they are.
    pub passes: Vec<(usize, usize)>,
    /// Uniform draws in visiting order (stochastic mode only).
    pub draws: Vec<f64>,
    /// Coarse node of every input node.
    pub assignment: Vec<usize>,
    pub coarse_edges: Vec<(usize, usize)>,
    /// Input edges crossing each coarse edge.
    pub coarse_edge_sources: Vec<Vec<usize>>,
}

/// Greedy merge pass: edges in descending score order, each merges when
/// its score beats the draw (or threshold) and both endpoints are still free.
///
/// Coarse ids follow the smallest input node of each cluster.
pub fn plan_contraction<R: Rng>(
    node_count: usize,
    edges: &[(usize, usize)],
    scores: &[f64],
    mode: MergeMode,
    rng: &mut R,
) -> Result<LayerTrace> {
    if scores.len() != edges.len() {
        return Err(Error::shape(format!(
            "{} scores for {} edges",
            scores.len(),
            edges.len()
        )));
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut partner: Vec<Option<(usize, usize)>> = vec![None; node_count];
    let mut draws = Vec::new();
    let layer_draw = match mode {
        MergeMode::StochasticPerLayer if !edges.is_empty() => {
            let p: f64 = rng.gen();
            draws.push(p);
            p
        }
        _ => 0.0,
    };
    for &e in &order {
        let threshold = match mode {
            MergeMode::Threshold(t) => t,
            MergeMode::StochasticPerLayer => layer_draw,
            MergeMode::Stochastic => {
                let p: f64 = rng.gen();
                draws.push(p);
                p
            }
        };
        let (u, v) = edges[e];
        if scores[e] > threshold && partner[u].is_none() && partner[v].is_none() {
            partner[u] = Some((v, e));
            partner[v] = Some((u, e));
        }
    }

    let mut assignment = vec![usize::MAX; node_count];
    let mut merges = Vec::new();
    let mut passes = Vec::new();
    let mut next = 0;
    for x in 0..node_count {
        match partner[x] {
            None => {
                assignment[x] = next;
                passes.push((x, next));
                next += 1;
            }
            Some((y, e)) if x < y => {
                assignment[x] = next;
                assignment[y] = next;
                merges.push(MergeEvent {
                    edge: e,
                    u: x,
                    v: y,
                    into: next,
                });
                next += 1;
            }
            Some(_) => {}
        }
    }

    let mut crossing: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (e, &(u, v)) in edges.iter().enumerate() {
        let (a, b) = (assignment[u], assignment[v]);
        if a != b {
            crossing.entry((a.min(b), a.max(b))).or_default().push(e);
        }
    }
    let (coarse_edges, coarse_edge_sources) = crossing.into_iter().unzip();
    Ok(LayerTrace {
        input_nodes: node_count,
        output_nodes: next,
        merges,
        passes,
        draws,
        assignment,
        coarse_edges,
        coarse_edge_sources,
    })
}

/// Result of one contraction: the coarse graph, its representations and
/// the decisions taken.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub graph: Graph,
    pub reps: Var,
    pub trace: LayerTrace,
}

/// Contracts `g` under `scored`.
///
/// A merged pair is represented by `s_{u,v} · h^M_{u,v}`, so the score head
/// receives gradient; a kept node by the self-pair `[h_v W_n, h_v W_n, 0] W`.
/// Coarse edge features are means of the crossing input edge features.
#[allow(clippy::too_many_arguments)]
pub fn contract<R: Rng>(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &EdgePoolLayer,
    g: &Graph,
    scored: &EdgeScores,
    mode: MergeMode,
    rng: &mut R,
) -> Result<Contraction> {
    let scores = scored.values(tape);
    let trace = plan_contraction(g.node_count(), g.edges(), &scores, mode, rng)?;
    let reps = coarse_reps(tape, store, layer, scored, &trace)?;
    let edge_features = g.edge_features().map(|f| mean_rows_of(f, &trace.coarse_edge_sources));
    let graph = coarse_graph(&trace, edge_features)?;
    Ok(Contraction { graph, reps, trace })
}

fn coarse_graph(trace: &LayerTrace, edge_features: Option<Tensor>) -> Result<Graph> {
    let mut b = GraphBuilder::new(trace.output_nodes, trace.coarse_edges.clone());
    b.edge_features = edge_features;
    b.build()
}

fn mean_rows_of(f: &Tensor, groups: &[Vec<usize>]) -> Tensor {
    let c = f.cols();
    let mut out = Tensor::zeros(&[groups.len(), c]);
    for (i, grp) in groups.iter().enumerate() {
        let row = out.row_mut(i);
        for &e in grp {
            for (o, x) in row.iter_mut().zip(f.row(e)) {
                *o += x;
            }
        }
        row.iter_mut().for_each(|o| *o /= grp.len() as f64);
    }
    out
}

fn coarse_reps(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &EdgePoolLayer,
    scored: &EdgeScores,
    trace: &LayerTrace,
) -> Result<Var> {
    let mut blocks = Vec::new();
    // position of each coarse node within vcat(merged, passed)
    let mut position = vec![0usize; trace.output_nodes];
    if !trace.merges.is_empty() {
        let (cand, score) = match (scored.candidates, scored.scores) {
            (Some(c), Some(s)) => (c, s),
            _ => return Err(Error::State("merge without scored edges".into())),
        };
        let idx: Vec<usize> = trace.merges.iter().map(|m| m.edge).collect();
        let c = tape.gather(cand, idx.clone())?;
        let s = tape.gather(score, idx)?;
        blocks.push(tape.scale_rows(c, s)?);
        for (k, m) in trace.merges.iter().enumerate() {
            position[m.into] = k;
        }
    }
    if !trace.passes.is_empty() {
        let nodes: Vec<usize> = trace.passes.iter().map(|p| p.0).collect();
        let hp = tape.gather(scored.node_proj, nodes)?;
        let mut parts = vec![hp, hp];
        let k_e = layer.edge_width(store);
        if k_e > 0 {
            parts.push(tape.constant(Tensor::zeros(&[trace.passes.len(), k_e])));
        }
        let cat = tape.hcat(&parts)?;
        blocks.push(linear(tape, store, cat, &layer.w)?);
        let offset = trace.merges.len();
        for (k, p) in trace.passes.iter().enumerate() {
            position[p.1] = offset + k;
        }
    }
    let stacked = if blocks.len() == 1 { blocks[0] } else { tape.vcat(&blocks)? };
    tape.gather(stacked, position)
}

/// Composition of per-layer traces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoarseningTrace {
    pub layers: Vec<LayerTrace>,
}

impl CoarseningTrace {
    /// Top-level cluster of every original node.
    pub fn assignment(&self) -> Vec<usize> {
        let Some(first) = self.layers.first() else {
            return Vec::new();
        };
        let mut map = first.assignment.clone();
        for layer in &self.layers[1..] {
            for c in map.iter_mut() {
                *c = layer.assignment[*c];
            }
        }
        map
    }

    pub fn cluster_count(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_nodes)
    }

    /// Sorted original nodes of each top-level cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (v, c) in self.assignment().into_iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Stacked coarsening of `g` from node representations `x`.
#[derive(Debug, Clone)]
pub struct Coarsening {
    /// Final-layer cluster representations, one row per cluster.
    pub reps: Var,
    pub trace: CoarseningTrace,
}

pub fn coarsen<R: Rng>(
    tape: &mut Tape,
    store: &ParamStore,
    g: &Graph,
    x: Var,
    layers: &[EdgePoolLayer],
    mode: MergeMode,
    rng: &mut R,
) -> Result<Coarsening> {
    if layers.is_empty() {
        return Err(Error::Config("at least one EdgePool layer is required".into()));
    }
    let mut level = g.clone();
    let mut h = x;
    let mut trace = CoarseningTrace::default();
    // original edges behind each edge of the current level
    let mut sources: Vec<Vec<usize>> = (0..g.edge_count()).map(|e| vec![e]).collect();
    for layer in layers {
        let scored = score_edges(tape, store, &level, h, layer)?;
        let step = contract(tape, store, layer, &level, &scored, mode, rng)?;
        sources = step
            .trace
            .coarse_edge_sources
            .iter()
            .map(|grp| grp.iter().flat_map(|&e| sources[e].iter().copied()).collect())
            .collect();
        let feats = g.edge_features().map(|f| mean_rows_of(f, &sources));
        level = coarse_graph(&step.trace, feats)?;
        h = step.reps;
        trace.layers.push(step.trace);
    }
    Ok(Coarsening { reps: h, trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Motif {
    pub subgraph: Subgraph,
    pub representation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotifSet {
    pub graph_id: usize,
    pub motifs: Vec<Motif>,
}

impl MotifSet {
    pub fn len(&self) -> usize {
        self.motifs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motifs.is_empty()
    }

    pub fn representations(&self) -> Tensor {
        let rows: Vec<Vec<f64>> = self.motifs.iter().map(|m| m.representation.clone()).collect();
        Tensor::from_rows(&rows).expect("motifs share one width")
    }
}

/// Runs the coarsening on `g` (without gradients) and recovers its motifs.
pub fn discover_motifs<R: Rng>(
    store: &ParamStore,
    g: &Graph,
    graph_id: usize,
    x: &Tensor,
    layers: &[EdgePoolLayer],
    mode: MergeMode,
    rng: &mut R,
) -> Result<(MotifSet, CoarseningTrace)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let c = coarsen(&mut tape, store, g, xv, layers, mode, rng)?;
    let reps = tape.value(c.reps);
    let motifs = c
        .trace
        .clusters()
        .iter()
        .enumerate()
        .map(|(i, nodes)| {
            Ok(Motif {
                subgraph: induced_subgraph(g, nodes)?,
                representation: reps.row(i).to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((MotifSet { graph_id, motifs }, c.trace))
}

/// Sum over unordered motif pairs of `(Ω(h_a, h_b) − WWL(S_a, S_b))²` with
/// `Ω = (cos + 1) / 2`.
///
/// `reps` has one row per entry of `subgraphs`. Fewer than two motifs give a
/// constant zero.
pub fn similarity_loss(
    tape: &mut Tape,
    reps: Var,
    subgraphs: &[Subgraph],
    depth: usize,
    lambda: f64,
    cache: Option<&WwlCache>,
) -> Result<Var> {
    let rows: Vec<usize> = (0..subgraphs.len()).collect();
    let subs: Vec<&Subgraph> = subgraphs.iter().collect();
    grouped_similarity_loss(tape, reps, &[(rows, subs)], depth, lambda, cache)
}

/// Mean over groups (graphs) of each group's pair sum. Each group lists its
/// rows of `reps` and the matching subgraphs. Groups with fewer than two
/// motifs still count in the mean and contribute zero.
pub fn grouped_similarity_loss(
    tape: &mut Tape,
    reps: Var,
    groups: &[(Vec<usize>, Vec<&Subgraph>)],
    depth: usize,
    lambda: f64,
    cache: Option<&WwlCache>,
) -> Result<Var> {
    if groups.is_empty() {
        return Err(Error::State("similarity loss over no graphs".into()));
    }
    let (mut left, mut right, mut targets) = (Vec::new(), Vec::new(), Vec::new());
    for (rows, subs) in groups {
        if rows.len() != subs.len() {
            return Err(Error::shape("motif rows and subgraphs differ in count"));
        }
        if rows.len() < 2 {
            log::debug!("similarity loss skipped for a graph with {} motif(s)", rows.len());
            continue;
        }
        let owned: Vec<Subgraph> = subs.iter().map(|s| (*s).clone()).collect();
        let k = pairwise_kernel_matrix(&owned, depth, lambda, cache)?;
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                left.push(rows[i]);
                right.push(rows[j]);
                targets.push(k[i][j]);
            }
        }
    }
    if left.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let a = tape.gather(reps, left)?;
    let b = tape.gather(reps, right)?;
    let cos = tape.row_cosine(a, b)?;
    let omega = tape.affine(cos, 0.5, 0.5);
    let n = targets.len();
    let t = tape.constant(Tensor::matrix(n, 1, targets)?);
    let diff = tape.sub(omega, t)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.affine(total, 1.0 / groups.len() as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_connected;
    use crate::tensor::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn triangle() -> Graph {
        GraphBuilder::new(3, vec![(0, 1), (1, 2), (0, 2)]).build().unwrap()
    }

    fn zero_params(store: &mut ParamStore) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store.get_mut(id).tensor.values_mut().fill(0.0);
        }
    }

    #[test]
    fn merge_mode_parses() {
        assert_eq!("stochastic".parse::<MergeMode>().unwrap(), MergeMode::Stochastic);
        assert_eq!(
            "threshold:0.5".parse::<MergeMode>().unwrap(),
            MergeMode::Threshold(0.5)
        );
        assert!("threshold:2".parse::<MergeMode>().is_err());
        assert!("greedy".parse::<MergeMode>().is_err());
        assert_eq!(MergeMode::Threshold(0.25).to_string(), "threshold:0.25");
        for m in [MergeMode::Stochastic, MergeMode::StochasticPerLayer] {
            assert_eq!(m.to_string().parse::<MergeMode>().unwrap(), m);
        }
    }

    #[test]
    fn zero_parameters_score_one_half() {
        let mut store = ParamStore::new();
        let layer = EdgePoolLayer::init(&mut store, "p", 3, 0, 4, &mut rng());
        zero_params(&mut store);
        let g = triangle();
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::from_rows(&vec![vec![1.0, 2.0, 3.0]; 3]).unwrap());
        let s = score_edges(&mut tape, &store, &g, h, &layer).unwrap();
        assert_eq!(s.values(&tape), vec![0.5; 3]);

        let lonely = GraphBuilder::new(2, vec![]).build().unwrap();
        let h = tape.constant(Tensor::zeros(&[2, 3]));
        let s = score_edges(&mut tape, &store, &lonely, h, &layer).unwrap();
        assert!(s.values(&tape).is_empty());

        let h = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(matches!(
            score_edges(&mut tape, &store, &g, h, &layer),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_edge_score_by_hand() {
        // din = 1, k = 1: W_n = [2], W = [[1], [0.5]], score head w = 3, b = 0.5
        let mut store = ParamStore::new();
        let layer = EdgePoolLayer::init(&mut store, "p", 1, 0, 1, &mut rng());
        store.get_mut(layer.wn.weight).tensor.values_mut().copy_from_slice(&[2.0]);
        store.get_mut(layer.w.weight).tensor.values_mut().copy_from_slice(&[1.0, 0.5]);
        store.get_mut(layer.score.weight).tensor.values_mut().copy_from_slice(&[3.0]);
        store.get_mut(layer.score.bias.unwrap()).tensor.values_mut().copy_from_slice(&[0.5]);
        // h^M = mean(0.6 + 0.1, 0.2 + 0.3) = 0.6; pre = 1.8 + 0.5 = 2.3
        let want = 1.0 / (1.0 + (-2.3f64).exp());
        for edge in [(0, 1), (1, 0)] {
            let g = GraphBuilder::new(2, vec![edge]).build().unwrap();
            let mut tape = Tape::new();
            let h = tape.constant(Tensor::matrix(2, 1, vec![0.3, 0.1]).unwrap());
            let s = score_edges(&mut tape, &store, &g, h, &layer).unwrap();
            assert!((s.values(&tape)[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_threshold_contraction() {
        let g = triangle();
        // scores aligned with sorted edges (0,1), (0,2), (1,2)
        let t = plan_contraction(3, g.edges(), &[0.9, 0.4, 0.6], MergeMode::Threshold(0.5), &mut rng())
            .unwrap();
        assert_eq!(t.output_nodes, 2);
        assert_eq!(t.merges.len(), 1);
        assert_eq!((t.merges[0].u, t.merges[0].v), (0, 1));
        assert_eq!(t.passes, vec![(2, 1)]);
        assert_eq!(t.coarse_edges, vec![(0, 1)]);
        assert_eq!(t.coarse_edge_sources, vec![vec![1, 2]]);
        assert!(t.draws.is_empty());
    }

    #[test]
    fn low_scores_pass_everything_through() {
        let g = GraphBuilder::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]).build().unwrap();
        let t = plan_contraction(4, g.edges(), &[0.1, 0.2, 0.3, 0.4], MergeMode::Threshold(0.5), &mut rng())
            .unwrap();
        assert_eq!(t.output_nodes, 4);
        assert_eq!(t.assignment, vec![0, 1, 2, 3]);
        assert_eq!(t.coarse_edges, g.edges());

        let one = plan_contraction(2, &[(0, 1)], &[0.9], MergeMode::Threshold(0.5), &mut rng()).unwrap();
        assert_eq!(one.output_nodes, 1);
        assert!(one.coarse_edges.is_empty());
    }

    #[test]
    fn stochastic_draws_are_reproducible() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4)];
        let scores = [0.5, 0.7, 0.2, 0.9];
        let a = plan_contraction(5, &edges, &scores, MergeMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let b = plan_contraction(5, &edges, &scores, MergeMode::Stochastic, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 4);

        let c = plan_contraction(5, &edges, &scores, MergeMode::StochasticPerLayer, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(c.draws.len(), 1);
        // one shared draw acts like a threshold
        let t = plan_contraction(5, &edges, &scores, MergeMode::Threshold(c.draws[0]), &mut rng()).unwrap();
        assert_eq!(c.merges, t.merges);
    }

    #[test]
    fn contraction_representations() {
        let mut store = ParamStore::new();
        let layer = EdgePoolLayer::init(&mut store, "p", 2, 0, 3, &mut rng());
        let g = triangle();
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap());
        let scored = score_edges(&mut tape, &store, &g, h, &layer).unwrap();
        let c = contract(&mut tape, &store, &layer, &g, &scored, MergeMode::Threshold(0.0), &mut rng()).unwrap();
        assert_eq!(c.graph.node_count(), 2);
        assert_eq!(tape.value(c.reps).rows(), 2);

        // the merged row is the gated candidate of its edge
        let m = c.trace.merges[0];
        let cand = tape.value(scored.candidates.unwrap()).row(m.edge).to_vec();
        let s = scored.values(&tape)[m.edge];
        for (got, want) in tape.value(c.reps).row(m.into).iter().zip(&cand) {
            assert!((got - s * want).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_edge_features_are_means() {
        let ef = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let g = GraphBuilder::new(3, vec![(0, 1), (0, 2), (1, 2)])
            .edge_features(ef)
            .build()
            .unwrap();
        let mut store = ParamStore::new();
        let layer = EdgePoolLayer::init(&mut store, "p", 1, 2, 2, &mut rng());
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap());
        let scored = score_edges(&mut tape, &store, &g, h, &layer).unwrap();
        // only (0,1) can exceed the threshold when it is the sole edge above it
        let trace = plan_contraction(3, g.edges(), &[0.9, 0.1, 0.1], MergeMode::Threshold(0.5), &mut rng()).unwrap();
        let feats = mean_rows_of(g.edge_features().unwrap(), &trace.coarse_edge_sources);
        assert_eq!(feats.values(), &[0.0, 1.0]);
        assert!(scored.candidates.is_some());
    }

    #[test]
    fn threshold_one_gives_singletons() {
        let g = GraphBuilder::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).build().unwrap();
        let mut store = ParamStore::new();
        let layers = init_layers(&mut store, 2, 0, 4, 3, &mut rng());
        let x = Tensor::from_rows(&vec![vec![1.0, 0.5]; 5]).unwrap();
        let (ms, trace) = discover_motifs(&store, &g, 0, &x, &layers, MergeMode::Threshold(1.0), &mut rng()).unwrap();
        assert_eq!(ms.len(), 5);
        assert!(ms.motifs.iter().all(|m| m.subgraph.len() == 1));
        assert_eq!(trace.layers.len(), 3);
    }

    #[test]
    fn motifs_partition_and_respect_size_bound() {
        let edges: Vec<_> = (0..11).map(|i| (i, i + 1)).chain([(0, 6), (3, 9), (2, 11)]).collect();
        let g = GraphBuilder::new(12, edges).build().unwrap();
        let x = Tensor::from_rows(&(0..12).map(|i| vec![i as f64 / 12.0, 1.0]).collect::<Vec<_>>()).unwrap();
        for l in 1..=3 {
            let mut store = ParamStore::new();
            let layers = init_layers(&mut store, 2, 0, 4, l, &mut rng());
            let (ms, trace) =
                discover_motifs(&store, &g, 7, &x, &layers, MergeMode::Threshold(0.0), &mut rng()).unwrap();
            let mut all: Vec<usize> = ms.motifs.iter().flat_map(|m| m.subgraph.parent_nodes().to_vec()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..12).collect::<Vec<_>>());
            for m in &ms.motifs {
                assert!(m.subgraph.len() <= 1 << l);
                assert!(is_connected(&m.subgraph));
            }
            assert_eq!(trace.clusters().len(), ms.len());
            assert_eq!(ms.graph_id, 7);
        }
    }

    fn singleton(label: u32) -> Subgraph {
        let g = GraphBuilder::new(1, vec![]).labels(vec![label]).build().unwrap();
        induced_subgraph(&g, &[0]).unwrap()
    }

    #[test]
    fn similarity_loss_examples() {
        let subs = vec![singleton(0), singleton(1)];
        let mut tape = Tape::new();
        let reps = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap());
        let l = similarity_loss(&mut tape, reps, &subs, 1, 1.0, None).unwrap();
        let want = (1.0 - (-1.0f64).exp()).powi(2);
        assert!((tape.scalar(l).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.3996).abs() < 1e-4);

        let same = vec![singleton(3), singleton(3)];
        let l = similarity_loss(&mut tape, reps, &same, 2, 1.0, None).unwrap();
        assert!(tape.scalar(l).unwrap().abs() < 1e-15);

        let one = tape.constant(Tensor::from_rows(&[vec![1.0]]).unwrap());
        let l = similarity_loss(&mut tape, one, &subs[..1], 1, 1.0, None).unwrap();
        assert_eq!(tape.scalar(l).unwrap(), 0.0);
    }

    #[test]
    fn similarity_loss_gradient() {
        let g = GraphBuilder::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)])
            .labels(vec![0, 1, 0, 2, 2])
            .build()
            .unwrap();
        let subs: Vec<Subgraph> = [vec![0, 1], vec![2], vec![3, 4]]
            .iter()
            .map(|n| induced_subgraph(&g, n).unwrap())
            .collect();
        let mut store = ParamStore::new();
        let mut r = rng();
        let reps = store.add(
            "reps",
            Tensor::matrix(3, 4, (0..12).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap(),
        );
        let err = grad_check(&mut store, &[reps], 1e-6, |tape, st| {
            let v = tape.param(st, reps);
            similarity_loss(tape, v, &subs, 2, 1.0, None)
        })
        .unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }
}
