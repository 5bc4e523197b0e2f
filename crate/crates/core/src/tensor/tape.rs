//! Reverse-mode tape over 2-D tensors.
//!
//! Every primitive pushes one node holding its forward value and the
//! operands it needs for the backward pass. [`Tape::backward`] walks the
//! nodes once in reverse order and accumulates parameter gradients into a
//! [`ParamStore`]. A tape is meant to live for one forward/backward pass.

use super::{gemm, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    ScaleRows(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    HCat(Vec<Var>),
    VCat(Vec<Var>),
    RowCosine { a: Var, b: Var, na: Vec<f64>, nb: Vec<f64> },
    Bce(Var, Vec<f64>),
    BceLogits(Var, Vec<f64>),
    MaskRows { x: Var, token: Var, masked: Vec<bool> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Predictions are clamped to this distance from 0 and 1 before `ln`.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, rows: usize, cols: usize, values: Vec<f64>, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Const => false,
            Op::Param(_) => true,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::ScaleRows(a, b)
            | Op::RowCosine { a, b, .. }
            | Op::MaskRows { x: a, token: b, .. } => self.needs(*a) || self.needs(*b),
            Op::Affine(a, _)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::MeanRows(a)
            | Op::Gather(a, _)
            | Op::ScatterAdd(a, _)
            | Op::Bce(a, _)
            | Op::BceLogits(a, _) => self.needs(*a),
            Op::HCat(vs) | Op::VCat(vs) => vs.iter().any(|v| self.needs(*v)),
        };
        let value = Tensor::matrix(rows, cols, values).expect("op produced consistent shape");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let (r, c) = (t.rows(), t.cols());
        self.push(r, c, t.into_values(), Op::Const)
    }

    /// Records the current value of a parameter as a gradient leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let t = &store.get(id).tensor;
        self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::shape(format!("matmul {m}x{k} · {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            self.value(a).values(),
            m,
            k,
            false,
            self.value(b).values(),
            k,
            n,
            false,
            &mut out,
            false,
        );
        Ok(self.push(m, n, out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(usize, usize)> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(Error::shape(format!("{what}: {da:?} vs {db:?}")));
        }
        Ok(da)
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (r, c) = self.same_shape(a, b, what)?;
        let out = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| f(*x, *y))
            .collect();
        Ok(self.push(r, c, out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if self.dims(row) != (1, c) {
            return Err(Error::shape(format!(
                "add_row: {r}x{c} + {:?}",
                self.dims(row)
            )));
        }
        let b = self.value(row).values().to_vec();
        let out = self
            .value(a)
            .values()
            .chunks(c.max(1))
            .flat_map(|chunk| chunk.iter().zip(&b).map(|(x, y)| x + y))
            .collect();
        Ok(self.push(r, c, out, Op::AddRow(a, row)))
    }

    /// Multiplies row `i` of `a` by `s[i]`, where `s` is `r × 1`.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if self.dims(s) != (r, 1) {
            return Err(Error::shape(format!(
                "scale_rows: {r}x{c} by {:?}",
                self.dims(s)
            )));
        }
        let sv = self.value(s).values().to_vec();
        let mut out = self.value(a).values().to_vec();
        if c > 0 {
            for (chunk, k) in out.chunks_mut(c).zip(&sv) {
                chunk.iter_mut().for_each(|v| *v *= k);
            }
        }
        Ok(self.push(r, c, out, Op::ScaleRows(a, s)))
    }

    /// `scale · a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let (r, c) = self.dims(a);
        let out = self.value(a).values().iter().map(|x| scale * x + shift).collect();
        self.push(r, c, out, Op::Affine(a, scale))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let out = self.value(a).values().iter().map(|x| x.max(0.0)).collect();
        self.push(r, c, out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let out = self.value(a).values().iter().map(|&x| sigmoid(x)).collect();
        self.push(r, c, out, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let out = self.value(a).values().iter().map(|x| x * x).collect();
        self.push(r, c, out, Op::Square(a))
    }

    /// Sum of all entries, as a `1 × 1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).values().iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    /// Mean of all entries, as a `1 × 1` value.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::shape("mean of an empty tensor"));
        }
        let s: f64 = self.value(a).values().iter().sum();
        Ok(self.push(1, 1, vec![s / n as f64], Op::Mean(a)))
    }

    /// Column-wise mean over rows: `r × c → 1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if r == 0 {
            return Err(Error::shape("mean over zero rows"));
        }
        let mut out = vec![0.0; c];
        for row in self.value(a).values().chunks(c.max(1)) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        Ok(self.push(1, c, out, Op::MeanRows(a)))
    }

    /// Row `i` of the output is row `idx[i]` of `a`.
    pub fn gather(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        let (r, c) = self.dims(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::Index { index: bad, len: r });
        }
        let src = self.value(a).values();
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in &idx {
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let n = idx.len();
        Ok(self.push(n, c, out, Op::Gather(a, idx)))
    }

    /// Row `i` of `a` is added into output row `idx[i]`; output has `out_rows` rows.
    pub fn scatter_add(&mut self, a: Var, idx: Vec<usize>, out_rows: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if idx.len() != r {
            return Err(Error::shape(format!(
                "scatter_add: {} indices for {r} rows",
                idx.len()
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= out_rows) {
            return Err(Error::Index {
                index: bad,
                len: out_rows,
            });
        }
        let src = self.value(a).values();
        let mut out = vec![0.0; out_rows * c];
        for (i, &t) in idx.iter().enumerate() {
            for (o, v) in out[t * c..(t + 1) * c].iter_mut().zip(&src[i * c..(i + 1) * c]) {
                *o += v;
            }
        }
        Ok(self.push(out_rows, c, out, Op::ScatterAdd(a, idx)))
    }

    /// Concatenates columns of equally tall operands.
    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        let r = parts.first().map_or(0, |&p| self.dims(p).0);
        if parts.iter().any(|&p| self.dims(p).0 != r) {
            return Err(Error::shape("hcat: row counts differ"));
        }
        let c: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(r, c, out, Op::HCat(parts.to_vec())))
    }

    /// Stacks rows of equally wide operands.
    pub fn vcat(&mut self, parts: &[Var]) -> Result<Var> {
        let c = parts.first().map_or(0, |&p| self.dims(p).1);
        if parts.iter().any(|&p| self.dims(p).1 != c) {
            return Err(Error::shape("vcat: column counts differ"));
        }
        let r: usize = parts.iter().map(|&p| self.dims(p).0).sum();
        let mut out = Vec::with_capacity(r * c);
        for &p in parts {
            out.extend_from_slice(self.value(p).values());
        }
        Ok(self.push(r, c, out, Op::VCat(parts.to_vec())))
    }

    /// Cosine similarity of matching rows: `r × c, r × c → r × 1`.
    ///
    /// Fails with a numeric error when any row has zero norm.
    pub fn row_cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape(a, b, "row_cosine")?;
        let (av, bv) = (self.value(a), self.value(b));
        let mut na = Vec::with_capacity(r);
        let mut nb = Vec::with_capacity(r);
        let mut out = Vec::with_capacity(r);
        for i in 0..r {
            let (x, y) = (&av.values()[i * c..(i + 1) * c], &bv.values()[i * c..(i + 1) * c]);
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 || !nx.is_finite() || !ny.is_finite() {
                return Err(Error::Numeric(format!(
                    "cosine undefined for row {i} (norms {nx}, {ny})"
                )));
            }
            let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
            out.push(dot / (nx * ny));
            na.push(nx);
            nb.push(ny);
        }
        Ok(self.push(r, 1, out, Op::RowCosine { a, b, na, nb }))
    }

    /// Mean binary cross-entropy of probabilities `p` (`r × 1`) against 0/1 labels.
    pub fn bce(&mut self, p: Var, labels: Vec<f64>) -> Result<Var> {
        let (r, c) = self.dims(p);
        if c != 1 || labels.len() != r {
            return Err(Error::shape(format!(
                "bce: predictions {r}x{c}, {} labels",
                labels.len()
            )));
        }
        if r == 0 {
            return Err(Error::State("bce over an empty batch".into()));
        }
        let pv = self.value(p).values();
        let total: f64 = pv
            .iter()
            .zip(&labels)
            .map(|(&q, &y)| {
                let q = q.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
            })
            .sum();
        Ok(self.push(1, 1, vec![total / r as f64], Op::Bce(p, labels)))
    }

    /// [`Tape::bce`] of `sigmoid(z)` for logits `z`, with the same clamped
    /// value. The gradient is `sigmoid(z) − y` everywhere, so saturated
    /// predictions still receive a signal.
    pub fn bce_with_logits(&mut self, z: Var, labels: Vec<f64>) -> Result<Var> {
        let (r, c) = self.dims(z);
        if c != 1 || labels.len() != r {
            return Err(Error::shape(format!(
                "bce: logits {r}x{c}, {} labels",
                labels.len()
            )));
        }
        if r == 0 {
            return Err(Error::State("bce over an empty batch".into()));
        }
        let total: f64 = self
            .value(z)
            .values()
            .iter()
            .zip(&labels)
            .map(|(&v, &y)| {
                let q = sigmoid(v).clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
            })
            .sum();
        Ok(self.push(1, 1, vec![total / r as f64], Op::BceLogits(z, labels)))
    }

    /// Replaces rows flagged in `masked` by the `1 × c` token row.
    pub fn mask_rows(&mut self, x: Var, token: Var, masked: Vec<bool>) -> Result<Var> {
        let (r, c) = self.dims(x);
        if self.dims(token) != (1, c) || masked.len() != r {
            return Err(Error::shape(format!(
                "mask_rows: {r}x{c} input, token {:?}, {} flags",
                self.dims(token),
                masked.len()
            )));
        }
        let tv = self.value(token).values().to_vec();
        let mut out = self.value(x).values().to_vec();
        for (i, &m) in masked.iter().enumerate() {
            if m {
                out[i * c..(i + 1) * c].copy_from_slice(&tv);
            }
        }
        Ok(self.push(r, c, out, Op::MaskRows { x, token, masked }))
    }

    /// Propagates `d loss` back through the tape and adds parameter
    /// gradients into `store`. Gradients accumulate until
    /// [`ParamStore::zero_grad`].
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        if !lv.values()[0].is_finite() {
            return Err(Error::Numeric(format!("loss is {}", lv.values()[0])));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads, store);
        }
        Ok(())
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.needs(v) {
            return None;
        }
        let n = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(
        &self,
        node: &Node,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        store: &mut ParamStore,
    ) {
        let out = &node.value;
        match &node.op {
            Op::Const => {}
            Op::Param(id) => store.accumulate_grad(*id, g),
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = self.dims(*b).1;
                let bv = self.value(*b).values();
                if let Some(ga) = self.acc(grads, *a) {
                    // dA = G · Bᵀ
                    gemm(g, m, n, false, bv, k, n, true, ga, true);
                }
                let av = self.value(*a).values();
                if let Some(gb) = self.acc(grads, *b) {
                    // dB = Aᵀ · G
                    gemm(av, m, k, true, g, m, n, false, gb, true);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(ga) = self.acc(grads, v) {
                        add_into(ga, g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, *a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    gb.iter_mut().zip(g).for_each(|(s, v)| *s -= v);
                }
            }
            Op::Mul(a, b) => {
                let bv = self.value(*b).values();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, gv), y) in ga.iter_mut().zip(g).zip(bv) {
                        *s += gv * y;
                    }
                }
                let av = self.value(*a).values();
                if let Some(gb) = self.acc(grads, *b) {
                    for ((s, gv), x) in gb.iter_mut().zip(g).zip(av) {
                        *s += gv * x;
                    }
                }
            }
            Op::AddRow(a, row) => {
                if let Some(ga) = self.acc(grads, *a) {
                    add_into(ga, g);
                }
                let c = out.cols();
                if let Some(gr) = self.acc(grads, *row) {
                    for chunk in g.chunks(c.max(1)) {
                        add_into(gr, chunk);
                    }
                }
            }
            Op::ScaleRows(a, s) => {
                let c = out.cols();
                let sv = self.value(*s).values();
                if let Some(ga) = self.acc(grads, *a) {
                    if c > 0 {
                        for ((dst, gr), k) in ga.chunks_mut(c).zip(g.chunks(c)).zip(sv) {
                            dst.iter_mut().zip(gr).for_each(|(d, v)| *d += v * k);
                        }
                    }
                }
                let av = self.value(*a).values();
                if let Some(gs) = self.acc(grads, *s) {
                    if c > 0 {
                        for ((dst, gr), ar) in gs.iter_mut().zip(g.chunks(c)).zip(av.chunks(c)) {
                            *dst += gr.iter().zip(ar).map(|(p, q)| p * q).sum::<f64>();
                        }
                    }
                }
            }
            Op::Affine(a, scale) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(s, v)| *s += scale * v);
                }
            }
            Op::Relu(a) => {
                let av = self.value(*a).values();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, v), x) in ga.iter_mut().zip(g).zip(av) {
                        if *x > 0.0 {
                            *s += v;
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, v), y) in ga.iter_mut().zip(g).zip(out.values()) {
                        *s += v * y * (1.0 - y);
                    }
                }
            }
            Op::Square(a) => {
                let av = self.value(*a).values();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, v), x) in ga.iter_mut().zip(g).zip(av) {
                        *s += 2.0 * x * v;
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().for_each(|s| *s += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    let k = g[0] / ga.len() as f64;
                    ga.iter_mut().for_each(|s| *s += k);
                }
            }
            Op::MeanRows(a) => {
                let (r, c) = self.dims(*a);
                if let Some(ga) = self.acc(grads, *a) {
                    for chunk in ga.chunks_mut(c.max(1)) {
                        for (s, v) in chunk.iter_mut().zip(g) {
                            *s += v / r as f64;
                        }
                    }
                }
            }
            Op::Gather(a, idx) => {
                let c = out.cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, &src) in idx.iter().enumerate() {
                        add_into(&mut ga[src * c..(src + 1) * c], &g[i * c..(i + 1) * c]);
                    }
                }
            }
            Op::ScatterAdd(a, idx) => {
                let c = out.cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for (i, &dst) in idx.iter().enumerate() {
                        add_into(&mut ga[i * c..(i + 1) * c], &g[dst * c..(dst + 1) * c]);
                    }
                }
            }
            Op::HCat(parts) => {
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.dims(p).1;
                    if let Some(gp) = self.acc(grads, p) {
                        for (i, dst) in gp.chunks_mut(pc.max(1)).enumerate().take(out.rows()) {
                            let start = i * total + offset;
                            add_into(dst, &g[start..start + pc]);
                        }
                    }
                    offset += pc;
                }
            }
            Op::VCat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(gp) = self.acc(grads, p) {
                        add_into(gp, &g[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            Op::RowCosine { a, b, na, nb } => {
                let c = self.dims(*a).1;
                let (av, bv) = (self.value(*a).values(), self.value(*b).values());
                let cos = out.values();
                // d cos / d x = y / (|x||y|) - cos · x / |x|²
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..cos.len() {
                        let (x, y) = (&av[i * c..(i + 1) * c], &bv[i * c..(i + 1) * c]);
                        let inv = 1.0 / (na[i] * nb[i]);
                        let self_term = cos[i] / (na[i] * na[i]);
                        for j in 0..c {
                            ga[i * c + j] += g[i] * (y[j] * inv - self_term * x[j]);
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for i in 0..cos.len() {
                        let (x, y) = (&av[i * c..(i + 1) * c], &bv[i * c..(i + 1) * c]);
                        let inv = 1.0 / (na[i] * nb[i]);
                        let self_term = cos[i] / (nb[i] * nb[i]);
                        for j in 0..c {
                            gb[i * c + j] += g[i] * (x[j] * inv - self_term * y[j]);
                        }
                    }
                }
            }
            Op::BceLogits(z, labels) => {
                let zv = self.value(*z).values();
                let n = labels.len() as f64;
                if let Some(gz) = self.acc(grads, *z) {
                    for ((s, &v), &y) in gz.iter_mut().zip(zv).zip(labels) {
                        *s += g[0] * (sigmoid(v) - y) / n;
                    }
                }
            }
            Op::Bce(p, labels) => {
                let pv = self.value(*p).values();
                let n = labels.len() as f64;
                if let Some(gp) = self.acc(grads, *p) {
                    for ((s, &q), &y) in gp.iter_mut().zip(pv).zip(labels) {
                        // clamped region is flat
                        if q > BCE_CLAMP && q < 1.0 - BCE_CLAMP {
                            *s += g[0] * (-(y / q) + (1.0 - y) / (1.0 - q)) / n;
                        }
                    }
                }
            }
            Op::MaskRows { x, token, masked } => {
                let c = out.cols();
                if let Some(gx) = self.acc(grads, *x) {
                    for (i, &m) in masked.iter().enumerate() {
                        if !m {
                            add_into(&mut gx[i * c..(i + 1) * c], &g[i * c..(i + 1) * c]);
                        }
                    }
                }
                if let Some(gt) = self.acc(grads, *token) {
                    for (i, &m) in masked.iter().enumerate() {
                        if m {
                            add_into(gt, &g[i * c..(i + 1) * c]);
                        }
                    }
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[f64], shape: Vec<usize>) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::new(shape, values.to_vec()).unwrap());
        (s, id)
    }

    #[test]
    fn grad_of_sum_of_linear_map_is_column_sums() {
        // loss = sum(x · w); dloss/dw[i][j] = sum_r x[r][i]
        let (mut store, id) = store_with(&[0.5, -1.0, 2.0, 0.25, 3.0, 1.0], vec![3, 2]);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap());
        let w = tape.param(&store, id);
        let y = tape.matmul(x, w).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(
            store.get(id).grad().unwrap(),
            &[5.0, 5.0, 7.0, 7.0, 9.0, 9.0]
        );
    }

    #[test]
    fn constant_loss_gives_zero_grad() {
        let (mut store, id) = store_with(&[1.0, 2.0], vec![2]);
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let z = tape.affine(w, 0.0, 3.0);
        let loss = tape.sum(z);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(id).grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn two_backward_calls_double_the_grad() {
        let (mut store, id) = store_with(&[1.0, -2.0], vec![2]);
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let sq = tape.square(w);
        let loss = tape.sum(sq);
        tape.backward(loss, &mut store).unwrap();
        let once = store.get(id).grad().unwrap().to_vec();
        tape.backward(loss, &mut store).unwrap();
        let twice = store.get(id).grad().unwrap();
        assert_eq!(twice, &[2.0 * once[0], 2.0 * once[1]]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_non_finite() {
        let (mut store, id) = store_with(&[1.0, 2.0], vec![2]);
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        assert!(matches!(tape.backward(w, &mut store), Err(Error::Shape(_))));
        let big = tape.affine(w, f64::INFINITY, 0.0);
        let loss = tape.sum(big);
        assert!(matches!(
            tape.backward(loss, &mut store),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn bce_at_chance_is_ln2() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::matrix(4, 1, vec![0.5; 4]).unwrap());
        let l = tape.bce(p, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((tape.scalar(l).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn logit_bce_matches_probability_bce_and_keeps_gradient_when_saturated() {
        // loss = mean over (z, y) of −[y ln σ(z) + (1−y) ln(1−σ(z))]; dz = (σ(z) − y)/n
        let zs = [0.3, -1.2, 2.0];
        let ys = vec![1.0, 0.0, 0.0];
        let (mut store, id) = store_with(&zs, vec![3, 1]);
        let mut tape = Tape::new();
        let z = tape.param(&store, id);
        let l = tape.bce_with_logits(z, ys.clone()).unwrap();
        let p = tape.sigmoid(z);
        let lp = tape.bce(p, ys.clone()).unwrap();
        assert!((tape.scalar(l).unwrap() - tape.scalar(lp).unwrap()).abs() < 1e-12);
        tape.backward(l, &mut store).unwrap();
        for ((g, &z), &y) in store.get(id).grad().unwrap().iter().zip(&zs).zip(&ys) {
            let want = (1.0 / (1.0 + (-z).exp()) - y) / 3.0;
            assert!((g - want).abs() < 1e-12);
        }

        // σ(40) clamps, yet a wrong label still pushes the logit back
        let (mut store, id) = store_with(&[40.0], vec![1, 1]);
        let mut tape = Tape::new();
        let z = tape.param(&store, id);
        let l = tape.bce_with_logits(z, vec![0.0]).unwrap();
        assert!((tape.scalar(l).unwrap() + (BCE_CLAMP).ln()).abs() < 1e-9);
        tape.backward(l, &mut store).unwrap();
        assert!((store.get(id).grad().unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_cosine_rejects_zero_rows() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap());
        let b = tape.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
        assert!(matches!(tape.row_cosine(a, b), Err(Error::Numeric(_))));
    }
}
