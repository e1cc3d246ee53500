use crate::error::{Error, Result};
use crate::nn::ParamStore;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and element index of the worst mismatch.
    pub worst: (String, usize),
    /// Analytic and numeric values at the worst element.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against central differences for every
/// scalar in `store`.
///
/// `objective` must compute the loss and accumulate its gradient into the
/// store (starting from zeroed gradients). Stochastic layers must be off.
pub fn grad_check<F>(store: &mut ParamStore<f64>, eps: f64, mut objective: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore<f64>) -> Result<f64>,
{
    store.zero_grads();
    let base = objective(store)?;
    if !base.is_finite() {
        return Err(Error::NonFiniteLoss(format!("gradient check base loss {base}")));
    }
    let analytic: Vec<Vec<f64>> = store.params().iter().map(|p| p.grad.data().to_vec()).collect();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (String::new(), 0), worst_values: (0.0, 0.0), checked: 0 };
    for pi in 0..store.len() {
        for k in 0..store.params()[pi].value.len() {
            let orig = store.params()[pi].value.data()[k];
            let mut eval = |store: &mut ParamStore<f64>, w: f64| -> Result<f64> {
                store.params_mut()[pi].value.data_mut()[k] = w;
                store.zero_grads();
                let f = objective(store)?;
                if !f.is_finite() {
                    return Err(Error::NonFiniteLoss(format!("perturbed loss {f}")));
                }
                Ok(f)
            };
            let plus = eval(store, orig + eps)?;
            let minus = eval(store, orig - eps)?;
            store.params_mut()[pi].value.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic[pi][k], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (store.params()[pi].name.clone(), k);
                report.worst_values = (analytic[pi][k], numeric);
            }
            report.checked += 1;
        }
    }
    // Leave the analytic gradients in place for the caller.
    for (p, g) in store.params_mut().iter_mut().zip(analytic) {
        p.grad.data_mut().copy_from_slice(&g);
    }
    Ok(report)
}
