//! Joint pretraining, dual-level embedding and the scaling probe.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Schedule, TrainConfig};
use crate::cross::{build_pairs_grouped, match_loss, Discriminator};
use crate::edgepool::{coarsen, find_layers, grouped_similarity_loss, init_layers, EdgePoolLayer, MergeMode};
use crate::error::{Error, Result};
use crate::gin::{mean_rows, reconstruction_loss, Aggregation, NodeDecoder, NodeEncoder};
use crate::graph::{induced_subgraph, sample_mask, Dataset, FeatureOptions, Graph, GraphBuilder, Subgraph};
use crate::tensor::{AdamW, ParamStore, Tape, Tensor, Var};
use crate::wwl::WwlCache;

/// Merge rule used whenever motifs are extracted for inference.
pub const INFERENCE_MERGE: MergeMode = MergeMode::Threshold(0.5);

/// All trainable parts. Parameters live in a [`ParamStore`] and are found
/// again by name after loading a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpmModel {
    pub encoder: NodeEncoder,
    pub decoder: NodeDecoder,
    pub pools: Vec<EdgePoolLayer>,
    pub disc: Discriminator,
}

impl DgpmModel {
    pub fn init<R: Rng>(store: &mut ParamStore, cfg: &TrainConfig, in_dim: usize, edge_dim: usize, rng: &mut R) -> Self {
        let h = cfg.hidden_dim;
        let encoder = NodeEncoder::init(store, in_dim, h, cfg.n_gin_layers, rng);
        let decoder = NodeDecoder::init(store, h, in_dim, rng);
        let pools = init_layers(store, in_dim, edge_dim, h, cfg.n_edgepool_layers, rng);
        let disc = Discriminator::init(store, h, h, cfg.disc_hidden, rng);
        DgpmModel {
            encoder,
            decoder,
            pools,
            disc,
        }
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let missing = |what: &str| Error::Checkpoint(format!("checkpoint lacks the {what}"));
        let encoder = NodeEncoder::find(store).ok_or_else(|| missing("node encoder"))?;
        let decoder = NodeDecoder::find(store).ok_or_else(|| missing("node decoder"))?;
        let pools = find_layers(store);
        if pools.is_empty() {
            return Err(missing("EdgePool layers"));
        }
        let disc = Discriminator::find(store).ok_or_else(|| missing("discriminator"))?;
        Ok(DgpmModel {
            encoder,
            decoder,
            pools,
            disc,
        })
    }

    pub fn feature_dim(&self, store: &ParamStore) -> usize {
        self.encoder.in_dim(store)
    }

    /// Width of the dual-level embedding.
    pub fn embedding_dim(&self, store: &ParamStore) -> usize {
        self.encoder.hidden_dim + self.pools.last().map_or(0, |p| p.out_dim(store))
    }

    fn check_dataset(&self, store: &ParamStore, ds: &Dataset) -> Result<()> {
        let want = self.feature_dim(store);
        if ds.feature_dim() != want {
            return Err(Error::Checkpoint(format!(
                "model expects {want} node features, dataset has {}",
                ds.feature_dim()
            )));
        }
        if let Some(we) = self.pools[0].we {
            let e = ds.edge_feature_dim();
            if e != 0 && e != we.in_dim(store) {
                return Err(Error::Checkpoint(format!(
                    "model expects {} edge features, dataset has {e}",
                    we.in_dim(store)
                )));
            }
        }
        Ok(())
    }
}

/// Mean losses of one epoch. Losses with zero weight are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub total: f64,
    pub rec: f64,
    pub sim: f64,
    pub cross: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub store: ParamStore,
    pub model: DgpmModel,
    pub metrics: Vec<EpochMetrics>,
}

struct BatchLoss {
    total: Var,
    parts: [f64; 3],
}

/// Node features of `g` as a tensor; required for training and embedding.
fn features(g: &Graph) -> Result<&Tensor> {
    g.node_features()
        .ok_or_else(|| Error::State("graph has no node features".into()))
}

/// Forward pass of all enabled tasks on the disjoint union of `graphs`.
#[allow(clippy::too_many_arguments)]
fn batch_loss(
    tape: &mut Tape,
    store: &ParamStore,
    model: &DgpmModel,
    graphs: &[&Graph],
    cfg: &TrainConfig,
    w: [f64; 3],
    rng: &mut ChaCha8Rng,
    cache: &WwlCache,
) -> Result<BatchLoss> {
    let (union, offsets) = Graph::disjoint_union(graphs)?;
    let x = tape.constant(features(&union)?.clone());
    let agg = Aggregation::new(&union);
    let mut terms = Vec::new();
    let mut parts = [0.0; 3];

    if w[0] > 0.0 {
        let plan = sample_mask(&union, cfg.mask_rate, rng.gen())?;
        let h = model.encoder.forward(tape, store, &agg, x, Some(&plan))?;
        let z = model.decoder.forward(tape, store, &agg, h)?;
        let l = reconstruction_loss(tape, x, z, &plan)?;
        parts[0] = tape.scalar(l)?;
        terms.push((w[0], l));
    }

    if w[1] > 0.0 || w[2] > 0.0 {
        let c = coarsen(tape, store, &union, x, &model.pools, cfg.merge_mode, rng)?;
        let clusters = c.trace.clusters();
        let graph_of = |v: usize| offsets.partition_point(|&o| o <= v) - 1;
        // clusters of one graph are contiguous because coarse ids follow
        // the smallest member node
        let mut ranges: Vec<Range<usize>> = vec![0..0; graphs.len()];
        let mut subgraphs = Vec::with_capacity(clusters.len());
        for (k, nodes) in clusters.iter().enumerate() {
            let gi = graph_of(nodes[0]);
            if ranges[gi].is_empty() {
                ranges[gi] = k..k + 1;
            } else if ranges[gi].end == k {
                ranges[gi].end = k + 1;
            } else {
                return Err(Error::State("motifs of one graph are not contiguous".into()));
            }
            let local: Vec<usize> = nodes.iter().map(|&v| v - offsets[gi]).collect();
            subgraphs.push(induced_subgraph(graphs[gi], &local)?);
        }

        if w[1] > 0.0 {
            let groups: Vec<(Vec<usize>, Vec<&Subgraph>)> = ranges
                .iter()
                .map(|r| (r.clone().collect(), r.clone().map(|k| &subgraphs[k]).collect()))
                .collect();
            let l = grouped_similarity_loss(tape, c.reps, &groups, cfg.wl_depth, cfg.lambda, Some(cache))?;
            parts[1] = tape.scalar(l)?;
            terms.push((w[1], l));
        }
        if w[2] > 0.0 {
            let node_group: Vec<usize> = (0..union.node_count()).map(graph_of).collect();
            let batch = build_pairs_grouped(&c.trace.assignment(), &node_group, &ranges, cfg.neg_ratio, rng.gen())?;
            let hn = model.encoder.forward(tape, store, &agg, x, None)?;
            let l = match_loss(tape, store, &batch, hn, c.reps, &model.disc)?;
            parts[2] = tape.scalar(l)?;
            terms.push((w[2], l));
        }
    }

    let mut total = None;
    for (weight, l) in terms {
        let scaled = tape.affine(l, weight, 0.0);
        total = Some(match total {
            None => scaled,
            Some(t) => tape.add(t, scaled)?,
        });
    }
    let total = total.ok_or_else(|| Error::Config("no loss enabled".into()))?;
    Ok(BatchLoss { total, parts })
}

/// Weighted total loss of one batch under `cfg.loss_weights`, with every
/// random draw (mask, merges, negatives) taken from `seed`.
pub fn combined_loss(
    tape: &mut Tape,
    store: &ParamStore,
    model: &DgpmModel,
    graphs: &[&Graph],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Var> {
    let w = cfg.loss_weights;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = batch_loss(tape, store, model, graphs, cfg, [w.rec, w.sim, w.cross], &mut rng, &WwlCache::new())?;
    Ok(b.total)
}

fn epoch_weights(cfg: &TrainConfig, epoch: usize) -> [f64; 3] {
    let w = cfg.loss_weights;
    let cross = match cfg.schedule {
        Schedule::Staged if epoch < cfg.max_epoch / 2 => 0.0,
        _ => w.cross,
    };
    [w.rec, w.sim, cross]
}

/// Trains on every graph of `ds`.
///
/// With `checkpoint`, the final parameters are written there; if the loss
/// turns non-finite the last good parameters are written instead and a
/// numeric error is returned.
pub fn train(ds: &Dataset, cfg: &TrainConfig, checkpoint: Option<&Path>) -> Result<TrainOutput> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::State("cannot train on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let model = DgpmModel::init(&mut store, cfg, ds.feature_dim(), ds.edge_feature_dim(), &mut rng);
    let opt = AdamW::new(cfg.lr, cfg.weight_decay);
    let cache = WwlCache::new();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut metrics = Vec::with_capacity(cfg.max_epoch);

    for epoch in 0..cfg.max_epoch {
        let w = epoch_weights(cfg, epoch);
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let graphs: Vec<&Graph> = chunk.iter().map(|&i| &ds.graphs[i]).collect();
            let mut tape = Tape::new();
            let b = batch_loss(&mut tape, &store, &model, &graphs, cfg, w, &mut rng, &cache)?;
            let total = tape.scalar(b.total)?;
            if !total.is_finite() {
                if let Some(path) = checkpoint {
                    store.save(path)?;
                }
                return Err(Error::Numeric(format!(
                    "non-finite loss in epoch {}; last good parameters kept",
                    epoch + 1
                )));
            }
            store.zero_grad();
            tape.backward(b.total, &mut store)?;
            let ids = store.ids_with_grad();
            opt.step(&mut store, &ids)?;
            sums[0] += total;
            for k in 0..3 {
                sums[k + 1] += b.parts[k];
            }
            batches += 1;
        }
        let n = batches as f64;
        let m = EpochMetrics {
            epoch: epoch + 1,
            total: sums[0] / n,
            rec: sums[1] / n,
            sim: sums[2] / n,
            cross: sums[3] / n,
        };
        log::info!(
            "epoch {:>4}  total {:.5}  rec {:.5}  sim {:.5}  cross {:.5}",
            m.epoch,
            m.total,
            m.rec,
            m.sim,
            m.cross
        );
        metrics.push(m);
    }
    if let Some(path) = checkpoint {
        store.save(path)?;
    }
    Ok(TrainOutput { store, model, metrics })
}

/// Dual-level embedding of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub graph_id: usize,
    pub label: Option<usize>,
    pub vector: Vec<f64>,
}

/// Mean node representation (unmasked) concatenated with the mean motif
/// representation (threshold-mode discovery).
pub fn embed_graph(store: &ParamStore, model: &DgpmModel, g: &Graph) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(features(g)?.clone());
    let agg = Aggregation::new(g);
    let h = model.encoder.forward(&mut tape, store, &agg, x, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let c = coarsen(&mut tape, store, g, x, &model.pools, INFERENCE_MERGE, &mut rng)?;
    let mut v = mean_rows(tape.value(h))?;
    v.extend(mean_rows(tape.value(c.reps))?);
    Ok(v)
}

pub fn embed(ds: &Dataset, store: &ParamStore) -> Result<Vec<GraphEmbedding>> {
    let model = DgpmModel::from_store(store)?;
    model.check_dataset(store, ds)?;
    ds.graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            Ok(GraphEmbedding {
                graph_id: i,
                label: g.graph_label(),
                vector: embed_graph(store, &model, g)?,
            })
        })
        .collect()
}

/// Parameters of an untrained model, for baseline embeddings.
pub fn random_init_store(ds: &Dataset, cfg: &TrainConfig) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    DgpmModel::init(&mut store, cfg, ds.feature_dim(), ds.edge_feature_dim(), &mut rng);
    store
}

pub fn write_embeddings_csv(path: &Path, embeddings: &[GraphEmbedding]) -> Result<()> {
    std::fs::write(path, embeddings_csv(embeddings))?;
    Ok(())
}

pub fn embeddings_csv(embeddings: &[GraphEmbedding]) -> String {
    let dim = embeddings.first().map_or(0, |e| e.vector.len());
    let mut out = String::from("graph_id,label");
    for i in 0..dim {
        write!(out, ",e_{i}").unwrap();
    }
    out.push('\n');
    for e in embeddings {
        write!(out, "{},", e.graph_id).unwrap();
        if let Some(y) = e.label {
            write!(out, "{y}").unwrap();
        }
        for v in &e.vector {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_embeddings_csv(path: &Path) -> Result<Vec<GraphEmbedding>> {
    let text = std::fs::read_to_string(path)?;
    parse_embeddings_csv(&text).map_err(|msg| Error::parse(path, msg))
}

fn parse_embeddings_csv(text: &str) -> std::result::Result<Vec<GraphEmbedding>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty embedding file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "graph_id" || cols[1] != "label" {
        return Err("header must start with graph_id,label".into());
    }
    let dim = cols.len() - 2;
    let mut out = Vec::new();
    for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != dim + 2 {
            return Err(format!("line {}: {} fields, expected {}", no + 2, f.len(), dim + 2));
        }
        let bad = |what: &str| format!("line {}: bad {what}", no + 2);
        let graph_id = f[0].trim().parse().map_err(|_| bad("graph id"))?;
        let label = match f[1].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("label"))?),
        };
        let vector = f[2..]
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("value")))
            .collect::<std::result::Result<_, _>>()?;
        out.push(GraphEmbedding { graph_id, label, vector });
    }
    Ok(out)
}

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,loss_total,loss_rec,loss_sim,loss_cross\n");
    for m in metrics {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            m.epoch, m.total, m.rec, m.sim, m.cross
        )
        .unwrap();
    }
    out
}

pub fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    std::fs::write(path, metrics_csv(metrics))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::parse(path, format!("line {}: malformed metrics row", no + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        out.push(EpochMetrics {
            epoch: f[0].trim().parse().map_err(|_| bad())?,
            total: num(f[1])?,
            rec: num(f[2])?,
            sim: num(f[3])?,
            cross: num(f[4])?,
        });
    }
    Ok(out)
}

/// Wall time of one training step on a random graph of each size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub nodes: usize,
    pub edges: usize,
    pub seconds: f64,
}

/// Random connected graph: a random tree plus `n / 2` extra edges, with
/// seven node label types.
pub fn random_graph<R: Rng>(n: usize, rng: &mut R) -> Result<Graph> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    if n > 2 {
        for _ in 0..n / 2 {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            edges.push((u, v));
        }
    }
    let mut b = GraphBuilder::new(n, edges);
    b.node_labels = Some((0..n).map(|_| rng.gen_range(0..7)).collect());
    b.build()
}

pub fn scaling_probe(sizes: &[usize], cfg: &TrainConfig) -> Result<Vec<ProbeRow>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let g = silence_warnings(|| random_graph(n.max(1), &mut rng))?;
        let raw = crate::graph::RawGraph {
            n: g.node_count(),
            edges: g.edges().to_vec(),
            labels: Some(g.node_labels().iter().map(|&l| l as i64).collect()),
            edge_labels: None,
            y: Some(0),
        };
        let ds = Dataset::from_raw("probe", vec![raw], FeatureOptions::default())?;
        let mut store = ParamStore::new();
        let model = DgpmModel::init(&mut store, cfg, ds.feature_dim(), 0, &mut rng);
        let opt = AdamW::new(cfg.lr, cfg.weight_decay);
        let cache = WwlCache::new();
        let w = epoch_weights(cfg, cfg.max_epoch);
        let start = Instant::now();
        let mut tape = Tape::new();
        let b = batch_loss(&mut tape, &store, &model, &[&ds.graphs[0]], cfg, w, &mut rng, &cache)?;
        store.zero_grad();
        tape.backward(b.total, &mut store)?;
        let ids = store.ids_with_grad();
        opt.step(&mut store, &ids)?;
        rows.push(ProbeRow {
            nodes: g.node_count(),
            edges: g.edge_count(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

// random extra edges may repeat; dropping them is expected here
fn silence_warnings<T>(f: impl FnOnce() -> T) -> T {
    let level = log::max_level();
    log::set_max_level(log::LevelFilter::Error);
    let out = f();
    log::set_max_level(level);
    out
}

pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from("nodes,edges,seconds\n");
    for r in rows {
        writeln!(out, "{},{},{:.6e}", r.nodes, r.edges, r.seconds).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LossWeights;
    use crate::graph::RawGraph;

    pub(crate) fn toy_dataset() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let raws = (0..8)
            .map(|i| {
                let g = silence_warnings(|| random_graph(5 + i, &mut rng)).unwrap();
                RawGraph {
                    n: g.node_count(),
                    edges: g.edges().to_vec(),
                    labels: Some(g.node_labels().iter().map(|&l| (l % 3) as i64).collect()),
                    edge_labels: None,
                    y: Some((i % 2) as i64),
                }
            })
            .collect();
        Dataset::from_raw("toy", raws, FeatureOptions::default()).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            n_gin_layers: 2,
            n_edgepool_layers: 2,
            hidden_dim: 8,
            disc_hidden: 8,
            max_epoch: 3,
            batch_size: 3,
            lr: 0.01,
            merge_mode: MergeMode::Threshold(0.5),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset();
        let a = train(&ds, &small_cfg(), None).unwrap();
        let b = train(&ds, &small_cfg(), None).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.store.to_bytes(), b.store.to_bytes());
        assert_eq!(embed(&ds, &a.store).unwrap(), embed(&ds, &b.store).unwrap());
    }

    #[test]
    fn node_only_weights_skip_motif_losses() {
        let ds = toy_dataset();
        let cfg = TrainConfig {
            loss_weights: LossWeights { rec: 1.0, sim: 0.0, cross: 0.0 },
            ..small_cfg()
        };
        let out = train(&ds, &cfg, None).unwrap();
        assert!(out.metrics.iter().all(|m| m.sim == 0.0 && m.cross == 0.0 && m.rec > 0.0));
        let pool = out.store.find("pool.0.wn.w").unwrap();
        assert_eq!(out.store.get(pool).step_count(), 0);
    }

    #[test]
    fn staged_schedule_defers_matching() {
        let ds = toy_dataset();
        let cfg = TrainConfig {
            schedule: Schedule::Staged,
            max_epoch: 4,
            ..small_cfg()
        };
        let m = train(&ds, &cfg, None).unwrap().metrics;
        assert_eq!(m[0].cross, 0.0);
        assert_eq!(m[1].cross, 0.0);
        assert!(m[2].cross > 0.0);
    }

    #[test]
    fn embedding_shape_and_dimension_check() {
        let ds = toy_dataset();
        let out = train(&ds, &small_cfg(), None).unwrap();
        let e = embed(&ds, &out.store).unwrap();
        assert_eq!(e.len(), ds.len());
        assert!(e.iter().all(|x| x.vector.len() == 16));
        assert_eq!(out.model.embedding_dim(&out.store), 16);

        let other = Dataset::from_raw(
            "other",
            vec![RawGraph {
                n: 2,
                edges: vec![(0, 1)],
                labels: Some(vec![0, 9]),
                edge_labels: None,
                y: Some(0),
            }],
            FeatureOptions::default(),
        )
        .unwrap();
        assert!(matches!(embed(&other, &out.store), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn single_node_graph_embedding() {
        let ds = Dataset::from_raw(
            "one",
            vec![RawGraph {
                n: 1,
                edges: vec![],
                labels: Some(vec![0]),
                edge_labels: None,
                y: Some(0),
            }],
            FeatureOptions::default(),
        )
        .unwrap();
        let store = random_init_store(&ds, &small_cfg());
        let model = DgpmModel::from_store(&store).unwrap();
        let v = embed_graph(&store, &model, &ds.graphs[0]).unwrap();
        assert_eq!(v.len(), 16);
    }

    #[test]
    fn csv_round_trips() {
        let e = vec![
            GraphEmbedding {
                graph_id: 0,
                label: Some(1),
                vector: vec![0.1, -1.0 / 3.0, 1e-300, f64::MAX],
            },
            GraphEmbedding {
                graph_id: 5,
                label: None,
                vector: vec![0.0, -0.0, 2.5, std::f64::consts::PI],
            },
        ];
        let parsed = parse_embeddings_csv(&embeddings_csv(&e)).unwrap();
        for (a, b) in e.iter().zip(&parsed) {
            assert_eq!(a.graph_id, b.graph_id);
            assert_eq!(a.label, b.label);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.vector), bits(&b.vector));
        }
        assert!(parse_embeddings_csv("id,label\n").is_err());
        assert!(parse_embeddings_csv("graph_id,label,e_0\n0,1\n").is_err());
    }

    #[test]
    fn probe_rows() {
        let cfg = small_cfg();
        assert!(scaling_probe(&[], &cfg).unwrap().is_empty());
        let rows = scaling_probe(&[20, 40], &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].nodes, 40);
        assert_eq!(probe_csv(&rows).lines().count(), 3);
    }
}
