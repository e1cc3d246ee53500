use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Nadam,
    Rmsprop,
}

/// Optimizer hyperparameters. Moment buffers live in the [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub eps: f64,
}

/// Momentum-schedule decay used by Nadam.
const NADAM_SCHEDULE_DECAY: f64 = 0.004;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer { kind, lr, beta1: 0.9, beta2: 0.999, rho: 0.9, eps: 1e-7 }
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn nadam(lr: f64) -> Self {
        Self::new(OptimizerKind::Nadam, lr)
    }

    pub fn rmsprop(lr: f64) -> Self {
        Self::new(OptimizerKind::Rmsprop, lr)
    }

    fn nadam_mu(&self, t: u64) -> f64 {
        self.beta1 * (1.0 - 0.5 * 0.96f64.powf(t as f64 * NADAM_SCHEDULE_DECAY))
    }

    /// Applies one update from the gradients currently in `store`.
    /// Gradients are left untouched; the caller zeroes them.
    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>) -> Result<()> {
        let step = store.step_count();
        for p in store.params() {
            if let Some(index) = p.grad.data().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    name: p.name.clone(),
                    index,
                    value: p.grad.data()[index].as_f64(),
                    step,
                });
            }
        }
        let t = step + 1;
        let (params, moments, counter) = store.optimizer_parts();
        let c = |v: f64| T::from_f64_lossy(v);
        let one = T::one();
        match self.kind {
            OptimizerKind::Adam => {
                let (b1, b2) = (c(self.beta1), c(self.beta2));
                let bc1 = c(1.0 - self.beta1.powf(t as f64));
                let bc2 = c(1.0 - self.beta2.powf(t as f64));
                let (lr, eps) = (c(self.lr), c(self.eps));
                for (p, mom) in params.iter_mut().zip(moments.iter_mut()) {
                    let w = p.value.data_mut();
                    for (((w, &g), m), v) in w.iter_mut().zip(p.grad.data()).zip(&mut mom.m).zip(&mut mom.v) {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Nadam => {
                let schedule: f64 = (1..t).map(|i| self.nadam_mu(i)).product();
                let mu_t = self.nadam_mu(t);
                let mu_next = self.nadam_mu(t + 1);
                let sched_new = schedule * mu_t;
                let sched_next = sched_new * mu_next;
                let (b1, b2) = (c(self.beta1), c(self.beta2));
                let g_scale = c(1.0 / (1.0 - sched_new));
                let m_scale = c(1.0 / (1.0 - sched_next));
                let v_scale = c(1.0 / (1.0 - self.beta2.powf(t as f64)));
                let (mu_t, mu_next) = (c(mu_t), c(mu_next));
                let (lr, eps) = (c(self.lr), c(self.eps));
                for (p, mom) in params.iter_mut().zip(moments.iter_mut()) {
                    let w = p.value.data_mut();
                    for (((w, &g), m), v) in w.iter_mut().zip(p.grad.data()).zip(&mut mom.m).zip(&mut mom.v) {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                        let m_bar = (one - mu_t) * g * g_scale + mu_next * *m * m_scale;
                        *w = *w - lr * m_bar / ((*v * v_scale).sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Rmsprop => {
                let rho = c(self.rho);
                let (lr, eps) = (c(self.lr), c(self.eps));
                for (p, mom) in params.iter_mut().zip(moments.iter_mut()) {
                    let w = p.value.data_mut();
                    for ((w, &g), v) in w.iter_mut().zip(p.grad.data()).zip(&mut mom.v) {
                        *v = rho * *v + (one - rho) * g * g;
                        *w = *w - lr * g / (*v + eps).sqrt();
                    }
                }
            }
        }
        *counter = t;
        Ok(())
    }
}

/// Adds `lambda * sum(w^2)` over decayed tensors to the objective and
/// `2 * lambda * w` to their gradients. Returns the loss contribution.
pub fn l2_penalty<T: Scalar>(store: &mut ParamStore<T>, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let two_l = T::from_f64_lossy(2.0 * lambda);
    let mut total = 0.0;
    for p in store.params_mut().iter_mut().filter(|p| p.decay) {
        total += p.value.sum_of_squares();
        for (g, &w) in p.grad.data_mut().iter_mut().zip(p.value.data()) {
            *g = *g + two_l * w;
        }
    }
    lambda * total
}
