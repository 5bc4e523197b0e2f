use rand::Rng;

use super::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// Affine map `x · w + b` with `w: in × out` and optional bias `b: [out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng);
        // uniform in ±1/sqrt(fan_in), so a zero input still maps to a non-zero output
        let bias = with_bias.then(|| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let values = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            store.add(format!("{name}.b"), Tensor::new(vec![fan_out], values).expect("1-D bias"))
        });
        Linear { weight, bias }
    }

    /// Looks up `<name>.w` and optional `<name>.b` in a loaded store.
    pub fn find(store: &ParamStore, name: &str) -> Option<Self> {
        let weight = store.find(&format!("{name}.w"))?;
        let bias = store.find(&format!("{name}.b"));
        Some(Linear { weight, bias })
    }

    pub fn in_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).tensor.rows()
    }

    pub fn out_dim(&self, store: &ParamStore) -> usize {
        store.get(self.weight).tensor.cols()
    }
}

pub fn linear(tape: &mut Tape, store: &ParamStore, x: Var, layer: &Linear) -> Result<Var> {
    let w = tape.param(store, layer.weight);
    let y = tape.matmul(x, w)?;
    match layer.bias {
        Some(b) => {
            let b = tape.param(store, b);
            tape.add_row(y, b)
        }
        None => Ok(y),
    }
}

/// A stack of affine layers, each followed by its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<(Linear, Activation)>,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`; `hidden` activates every layer but the
    /// last, which uses `last`.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Self {
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let lin = Linear::init(store, &format!("{name}.{i}"), dims[i], dims[i + 1], true, rng);
                (lin, if i + 1 == n { last } else { hidden })
            })
            .collect();
        Mlp { layers }
    }

    pub fn find(
        store: &ParamStore,
        name: &str,
        hidden: Activation,
        last: Activation,
    ) -> Option<Self> {
        let mut linears = Vec::new();
        while let Some(l) = Linear::find(store, &format!("{name}.{}", linears.len())) {
            linears.push(l);
        }
        if linears.is_empty() {
            return None;
        }
        let n = linears.len();
        Some(Mlp {
            layers: linears
                .into_iter()
                .enumerate()
                .map(|(i, l)| (l, if i + 1 == n { last } else { hidden }))
                .collect(),
        })
    }

    pub fn in_dim(&self, store: &ParamStore) -> usize {
        self.layers[0].0.in_dim(store)
    }

    pub fn out_dim(&self, store: &ParamStore) -> usize {
        self.layers[self.layers.len() - 1].0.out_dim(store)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        mlp_forward(tape, store, x, &self.layers)
    }
}

pub fn mlp_forward(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    layers: &[(Linear, Activation)],
) -> Result<Var> {
    if layers.is_empty() {
        return Err(Error::shape("mlp with no layers"));
    }
    let mut h = x;
    for (lin, act) in layers {
        let z = linear(tape, store, h, lin)?;
        h = act.apply(tape, z);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn fixed_linear(store: &mut ParamStore, w: Tensor, b: Option<Tensor>) -> Linear {
        let weight = store.add("w", w);
        let bias = b.map(|b| store.add("b", b));
        Linear { weight, bias }
    }

    #[test]
    fn identity_input_returns_weights() {
        let mut store = ParamStore::new();
        let lin = fixed_linear(
            &mut store,
            Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            None,
        );
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let y = linear(&mut tape, &store, x, &lin).unwrap();
        assert_eq!(tape.value(y).values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let mut store = ParamStore::new();
        let lin = fixed_linear(
            &mut store,
            Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            None,
        );
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[3, 2]));
        let y = linear(&mut tape, &store, x, &lin).unwrap();
        assert!(tape.value(y).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_product_with_bias() {
        // [1,1]·[[2],[3]] + 1 = 6
        let mut store = ParamStore::new();
        let lin = fixed_linear(
            &mut store,
            Tensor::from_rows(&[vec![2.0], vec![3.0]]).unwrap(),
            Some(Tensor::new(vec![1], vec![1.0]).unwrap()),
        );
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap());
        let y = linear(&mut tape, &store, x, &lin).unwrap();
        assert_eq!(tape.value(y).values(), &[6.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut store = ParamStore::new();
        let lin = fixed_linear(&mut store, Tensor::zeros(&[3, 2]), None);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 2]));
        assert!(matches!(
            linear(&mut tape, &store, x, &lin),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mlp_activations() {
        let mut store = ParamStore::new();
        let lin = fixed_linear(
            &mut store,
            Tensor::from_rows(&[vec![1.0, -1.0]]).unwrap(),
            None,
        );
        let mut tape = Tape::new();
        let zero = tape.constant(Tensor::zeros(&[2, 1]));
        let s = mlp_forward(&mut tape, &store, zero, &[(lin, Activation::Sigmoid)]).unwrap();
        assert!(tape.value(s).values().iter().all(|&v| v == 0.5));

        let neg = tape.constant(Tensor::from_rows(&[vec![-2.0]]).unwrap());
        // pre-activation [-2, 2]; relu keeps only the second
        let r = mlp_forward(&mut tape, &store, neg, &[(lin, Activation::Relu)]).unwrap();
        assert_eq!(tape.value(r).values(), &[0.0, 2.0]);

        let x = tape.constant(Tensor::from_rows(&[vec![3.0]]).unwrap());
        let a = mlp_forward(&mut tape, &store, x, &[(lin, Activation::Identity)]).unwrap();
        let b = linear(&mut tape, &store, x, &lin).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
    }

    #[test]
    fn relu_of_all_negative_is_zero() {
        let mut store = ParamStore::new();
        let lin = fixed_linear(&mut store, Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap(), None);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![-1.0], vec![-4.0]]).unwrap());
        let r = mlp_forward(&mut tape, &store, x, &[(lin, Activation::Relu)]).unwrap();
        assert!(tape.value(r).values().iter().all(|&v| v == 0.0));
    }
}
