//! Node-level masked feature reconstruction with GIN encoder and decoder.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, MaskPlan};
use crate::tensor::{Activation, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

/// Message routing for sum aggregation: both directions of every edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    src: Vec<usize>,
    dst: Vec<usize>,
    nodes: usize,
}

impl Aggregation {
    pub fn new(g: &Graph) -> Self {
        let mut src = Vec::with_capacity(2 * g.edge_count());
        let mut dst = Vec::with_capacity(2 * g.edge_count());
        for &(u, v) in g.edges() {
            src.extend([u, v]);
            dst.extend([v, u]);
        }
        Aggregation {
            src,
            dst,
            nodes: g.node_count(),
        }
    }

    /// `x_v + Σ_{u ∈ N(v)} x_u` for every node.
    pub fn self_plus_neighbors(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        if tape.value(x).rows() != self.nodes {
            return Err(Error::shape(format!(
                "{} feature rows for {} nodes",
                tape.value(x).rows(),
                self.nodes
            )));
        }
        if self.src.is_empty() {
            return Ok(x);
        }
        let msgs = tape.gather(x, self.src.clone())?;
        let summed = tape.scatter_add(msgs, self.dst.clone(), self.nodes)?;
        tape.add(x, summed)
    }
}

/// One GIN layer with ε = 0: `MLP(x_v + Σ_{u∈N(v)} x_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub update_mlp: Mlp,
}

impl GinLayer {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let update_mlp = Mlp::init(
            store,
            &format!("{name}.mlp"),
            &[in_dim, hidden, out_dim],
            Activation::Relu,
            Activation::Identity,
            rng,
        );
        GinLayer { update_mlp }
    }

    fn find(store: &ParamStore, name: &str) -> Option<Self> {
        Mlp::find(store, &format!("{name}.mlp"), Activation::Relu, Activation::Identity)
            .map(|update_mlp| GinLayer { update_mlp })
    }

    pub fn out_dim(&self, store: &ParamStore) -> usize {
        self.update_mlp.out_dim(store)
    }
}

pub fn gin_forward(tape: &mut Tape, store: &ParamStore, g: &Graph, x: Var, layer: &GinLayer) -> Result<Var> {
    gin_forward_with(tape, store, &Aggregation::new(g), x, layer)
}

pub fn gin_forward_with(
    tape: &mut Tape,
    store: &ParamStore,
    agg: &Aggregation,
    x: Var,
    layer: &GinLayer,
) -> Result<Var> {
    let h = agg.self_plus_neighbors(tape, x)?;
    layer.update_mlp.forward(tape, store, h)
}

/// Replaces the masked rows of `x` with the learnable token row.
pub fn apply_mask(tape: &mut Tape, x: Var, plan: &MaskPlan, token: Var) -> Result<Var> {
    let n = tape.value(x).rows();
    if let Some(&bad) = plan.masked_nodes().iter().find(|&&v| v >= n) {
        return Err(Error::Index { index: bad, len: n });
    }
    tape.mask_rows(x, token, plan.flags(n))
}

/// Encoder `f_N`: stacked GIN layers with a mask token for the input.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEncoder {
    pub layers: Vec<GinLayer>,
    pub mask_token: ParamId,
    pub hidden_dim: usize,
}

impl NodeEncoder {
    pub fn init<R: Rng>(store: &mut ParamStore, in_dim: usize, hidden: usize, depth: usize, rng: &mut R) -> Self {
        let mask_token = store.add_zeros("enc.mask_token", &[in_dim]);
        let layers = (0..depth)
            .map(|i| {
                let d_in = if i == 0 { in_dim } else { hidden };
                GinLayer::init(store, &format!("enc.{i}"), d_in, hidden, hidden, rng)
            })
            .collect();
        NodeEncoder {
            layers,
            mask_token,
            hidden_dim: hidden,
        }
    }

    pub fn find(store: &ParamStore) -> Option<Self> {
        let mask_token = store.find("enc.mask_token")?;
        let mut layers = Vec::new();
        while let Some(l) = GinLayer::find(store, &format!("enc.{}", layers.len())) {
            layers.push(l);
        }
        let hidden_dim = layers.last()?.out_dim(store);
        Some(NodeEncoder {
            layers,
            mask_token,
            hidden_dim,
        })
    }

    pub fn in_dim(&self, store: &ParamStore) -> usize {
        store.get(self.mask_token).tensor.len()
    }

    /// Encodes `x`; with a plan, masked rows are first replaced by the token.
    /// ReLU sits between layers; the last layer's output is left linear.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        agg: &Aggregation,
        x: Var,
        plan: Option<&MaskPlan>,
    ) -> Result<Var> {
        let mut h = match plan {
            Some(p) => {
                let token = tape.param(store, self.mask_token);
                apply_mask(tape, x, p, token)?
            }
            None => x,
        };
        for (i, layer) in self.layers.iter().enumerate() {
            h = gin_forward_with(tape, store, agg, h, layer)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

/// Decoder `f'_N`: a single GIN layer back to the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecoder {
    pub layer: GinLayer,
}

impl NodeDecoder {
    pub fn init<R: Rng>(store: &mut ParamStore, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        NodeDecoder {
            layer: GinLayer::init(store, "dec", hidden, hidden, out_dim, rng),
        }
    }

    pub fn find(store: &ParamStore) -> Option<Self> {
        GinLayer::find(store, "dec").map(|layer| NodeDecoder { layer })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, agg: &Aggregation, h: Var) -> Result<Var> {
        gin_forward_with(tape, store, agg, h, &self.layer)
    }
}

/// Mean over masked nodes of `1 − cos(x_v, z_v)`.
pub fn reconstruction_loss(tape: &mut Tape, x: Var, z: Var, plan: &MaskPlan) -> Result<Var> {
    let (xs, zs) = (tape.value(x), tape.value(z));
    if (xs.rows(), xs.cols()) != (zs.rows(), zs.cols()) {
        return Err(Error::shape(format!(
            "reconstruction {}x{} vs original {}x{}",
            zs.rows(),
            zs.cols(),
            xs.rows(),
            xs.cols()
        )));
    }
    if plan.is_empty() {
        return Err(Error::State("reconstruction loss with no masked nodes".into()));
    }
    let idx = plan.masked_nodes().to_vec();
    let xm = tape.gather(x, idx.clone())?;
    let zm = tape.gather(z, idx)?;
    let cos = tape.row_cosine(xm, zm)?;
    let mean = tape.mean(cos)?;
    Ok(tape.affine(mean, -1.0, 1.0))
}

/// Row mean of node (or motif) representations.
pub fn mean_readout(tape: &mut Tape, h: Var) -> Result<Var> {
    tape.mean_rows(h)
}

/// Plain-value mean of rows, for inference paths that need no tape.
pub fn mean_rows(t: &Tensor) -> Result<Vec<f64>> {
    if t.rows() == 0 {
        return Err(Error::shape("mean over zero rows"));
    }
    let mut out = vec![0.0; t.cols()];
    for i in 0..t.rows() {
        for (o, v) in out.iter_mut().zip(t.row(i)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= t.rows() as f64);
    Ok(out)
}
