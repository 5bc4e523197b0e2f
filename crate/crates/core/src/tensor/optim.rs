use super::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// AdamW hyperparameters (decoupled weight decay).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }

    pub fn step(&self, store: &mut ParamStore, ids: &[ParamId]) -> Result<()> {
        adamw_step(store, ids, self.lr, self.weight_decay, self.betas, self.eps)
    }
}

/// Applies one AdamW update to each listed parameter in place.
///
/// Every listed parameter must carry a gradient.
pub fn adamw_step(
    store: &mut ParamStore,
    ids: &[ParamId],
    lr: f64,
    wd: f64,
    (b1, b2): (f64, f64),
    eps: f64,
) -> Result<()> {
    if let Some(missing) = ids.iter().find(|&&id| store.get(id).grad().is_none()) {
        return Err(Error::State(format!(
            "parameter '{}' has no gradient",
            store.get(*missing).name
        )));
    }
    for &id in ids {
        let p = store.get_mut(id);
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let grad = p.tensor.grad().expect("checked above").to_vec();
        let decay = 1.0 - lr * wd;
        let (m1, m2) = (&mut p.moment1, &mut p.moment2);
        for (i, w) in p.tensor.values_mut().iter_mut().enumerate() {
            let g = grad[i];
            *w *= decay;
            m1[i] = b1 * m1[i] + (1.0 - b1) * g;
            m2[i] = b2 * m2[i] + (1.0 - b2) * g * g;
            let mhat = m1[i] / bc1;
            let vhat = m2[i] / bc2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
