use super::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Compares tape gradients of `f` against central finite differences.
///
/// Returns the largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-6)`
/// over every component of the listed parameters. `f` must build the same
/// scalar deterministically on each call. Existing gradients in `store`
/// are cleared.
pub fn grad_check<F>(store: &mut ParamStore, ids: &[ParamId], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Config(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        let v = tape.scalar(out)?;
        if !v.is_finite() {
            return Err(Error::Numeric(format!("objective evaluated to {v}")));
        }
        Ok(v)
    };

    store.zero_grad();
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    tape.backward(out, store)?;
    drop(tape);

    let mut worst: f64 = 0.0;
    for &id in ids {
        let analytic = store
            .get(id)
            .grad()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; store.get(id).tensor.len()]);
        for (i, &a) in analytic.iter().enumerate() {
            let orig = store.get(id).tensor.values()[i];
            store.get_mut(id).tensor.values_mut()[i] = orig + h;
            let plus = eval(store);
            store.get_mut(id).tensor.values_mut()[i] = orig - h;
            let minus = eval(store);
            store.get_mut(id).tensor.values_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    store.zero_grad();
    Ok(worst)
}
