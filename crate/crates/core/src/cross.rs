//! Cross-level matching between node and motif representations.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edgepool::CoarseningTrace;
use crate::error::{Error, Result};
use crate::tensor::{Activation, Mlp, ParamStore, Tape, Var};

/// Node–motif pairs with affiliation labels (1 if the node lies in the motif).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchBatch {
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<f64>,
}

impl MatchBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1.0).count()
    }
}

/// All positive pairs plus one uniformly drawn negative per positive.
pub fn build_pairs(trace: &CoarseningTrace, n_nodes: usize, n_motifs: usize, rng_seed: u64) -> Result<MatchBatch> {
    let assignment = trace.assignment();
    if assignment.len() != n_nodes {
        return Err(Error::shape(format!(
            "trace covers {} nodes, expected {n_nodes}",
            assignment.len()
        )));
    }
    if trace.cluster_count() != n_motifs {
        return Err(Error::shape(format!(
            "trace has {} motifs, expected {n_motifs}",
            trace.cluster_count()
        )));
    }
    let groups = vec![0; n_nodes];
    build_pairs_grouped(&assignment, &groups, std::slice::from_ref(&(0..n_motifs)), 1, rng_seed)
}

/// Pair construction over a batch of graphs.
///
/// `node_group[v]` names the graph of node `v`, `group_motifs[g]` the motif
/// ids of graph `g`. Negatives for a node are drawn from its own graph's
/// other motifs, `neg_ratio` per positive.
pub fn build_pairs_grouped(
    assignment: &[usize],
    node_group: &[usize],
    group_motifs: &[Range<usize>],
    neg_ratio: usize,
    rng_seed: u64,
) -> Result<MatchBatch> {
    if assignment.len() != node_group.len() {
        return Err(Error::shape("assignment and node groups differ in length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut batch = MatchBatch::default();
    let mut lonely = 0usize;
    for (v, (&m, &g)) in assignment.iter().zip(node_group).enumerate() {
        let range = group_motifs
            .get(g)
            .ok_or(Error::Index { index: g, len: group_motifs.len() })?;
        if !range.contains(&m) {
            return Err(Error::State(format!("motif {m} of node {v} outside its graph")));
        }
        batch.pairs.push((v, m));
        batch.labels.push(1.0);
        let others = range.len() - 1;
        if others == 0 {
            lonely += 1;
            continue;
        }
        for _ in 0..neg_ratio {
            // uniform over the graph's motifs except m
            let k = range.start + rng.gen_range(0..others);
            let neg = if k >= m { k + 1 } else { k };
            batch.pairs.push((v, neg));
            batch.labels.push(0.0);
        }
    }
    if lonely > 0 {
        log::warn!("{lonely} node(s) in single-motif graphs: positives only");
    }
    Ok(batch)
}

/// Two-layer MLP over `[h^N_i, h^M_j]`; the sigmoid of its output is the
/// affiliation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub mlp: Mlp,
}

impl Discriminator {
    pub fn init<R: Rng>(store: &mut ParamStore, node_dim: usize, motif_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Discriminator {
            mlp: Mlp::init(
                store,
                "disc",
                &[node_dim + motif_dim, hidden, 1],
                Activation::Relu,
                Activation::Identity,
                rng,
            ),
        }
    }

    pub fn find(store: &ParamStore) -> Option<Self> {
        Mlp::find(store, "disc", Activation::Relu, Activation::Identity).map(|mlp| Discriminator { mlp })
    }

    /// Affiliation probabilities `[P × 1]` for the batch pairs.
    pub fn predict(&self, tape: &mut Tape, store: &ParamStore, batch: &MatchBatch, h_n: Var, h_m: Var) -> Result<Var> {
        let z = self.logits(tape, store, batch, h_n, h_m)?;
        Ok(tape.sigmoid(z))
    }

    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, batch: &MatchBatch, h_n: Var, h_m: Var) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::State("empty match batch".into()));
        }
        let want = self.mlp.in_dim(store);
        let got = tape.value(h_n).cols() + tape.value(h_m).cols();
        if want != got {
            return Err(Error::shape(format!(
                "discriminator expects width {want}, representations give {got}"
            )));
        }
        let nodes = tape.gather(h_n, batch.pairs.iter().map(|p| p.0).collect())?;
        let motifs = tape.gather(h_m, batch.pairs.iter().map(|p| p.1).collect())?;
        let cat = tape.hcat(&[nodes, motifs])?;
        self.mlp.forward(tape, store, cat)
    }
}

/// Mean binary cross-entropy of the discriminator over the batch.
pub fn match_loss(
    tape: &mut Tape,
    store: &ParamStore,
    batch: &MatchBatch,
    h_n: Var,
    h_m: Var,
    d: &Discriminator,
) -> Result<Var> {
    let z = d.logits(tape, store, batch, h_n, h_m)?;
    tape.bce_with_logits(z, batch.labels.clone())
}

/// Shuffles pairs and labels together; useful when subsampling a batch.
pub fn shuffle_batch<R: Rng>(batch: &mut MatchBatch, rng: &mut R) {
    let mut idx: Vec<usize> = (0..batch.len()).collect();
    idx.shuffle(rng);
    batch.pairs = idx.iter().map(|&i| batch.pairs[i]).collect();
    batch.labels = idx.iter().map(|&i| batch.labels[i]).collect();
}
