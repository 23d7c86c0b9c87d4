use std::collections::BTreeMap;

use super::array::NumArray;
use super::store::ParamStore;
use crate::error::{Error, Result};

/// Compares analytic gradients against central finite differences, parameter
/// by parameter, and returns the worst relative error.
///
/// `run` evaluates the loss at the store's current parameters and returns the
/// loss together with the analytic gradient map. Finite differencing reuses
/// the same closure and ignores the gradients it produces.
pub fn check_gradients<F>(store: &mut ParamStore, run: F, step: f64) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<(f64, BTreeMap<String, NumArray>)>,
{
    let (loss0, analytic) = run(store)?;
    if !loss0.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss0}")));
    }
    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    let mut worst = 0.0_f64;
    for name in &names {
        let n_el = store.arr(name)?.len();
        for k in 0..n_el {
            let orig = store.arr(name)?.data()[k];
            store.arr_mut(name)?.data_mut()[k] = orig + step;
            let (lp, _) = run(store)?;
            store.arr_mut(name)?.data_mut()[k] = orig - step;
            let (lm, _) = run(store)?;
            store.arr_mut(name)?.data_mut()[k] = orig;
            if !lp.is_finite() || !lm.is_finite() {
                return Err(Error::Numeric("non-finite loss under perturbation".into()));
            }
            let numeric = (lp - lm) / (2.0 * step);
            let a = analytic.get(name).map(|g| g.data()[k]).unwrap_or(0.0);
            let denom = numeric.abs().max(1e-8);
            let rel = (a - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
