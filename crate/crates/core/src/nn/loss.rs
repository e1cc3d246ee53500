use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Probability clamp used by the cross-entropy losses.
pub const PROB_EPS: f64 = 1e-7;

/// Stabiliser inside the embedding distance.
pub const DISTANCE_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
    Contrastive { margin: f64, lambda: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Contrastive { margin, lambda } if !(margin > 0.0 && lambda > 0.0) => Err(
                Error::config(format!("contrastive loss needs margin > 0 and lambda > 0, got {margin}, {lambda}")),
            ),
            _ => Ok(()),
        }
    }
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = T::from_f64_lossy(PROB_EPS);
    p.max(eps).min(T::one() - eps)
}

pub fn bce_loss<T: Scalar>(p: T, y: T) -> T {
    let p = clamp_prob(p);
    -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
}

/// Derivative of [`bce_loss`] with respect to `p` (evaluated at the clamped probability).
pub fn bce_grad<T: Scalar>(p: T, y: T) -> T {
    let p = clamp_prob(p);
    -(y / p) + (T::one() - y) / (T::one() - p)
}

/// `-ln p[argmax y]` for a one-hot target.
pub fn cce_loss<T: Scalar>(p: &[T], y: &[T]) -> Result<T> {
    if p.len() != y.len() || p.is_empty() {
        return Err(Error::shape(format!("cce over {} probabilities and {} targets", p.len(), y.len())));
    }
    let target = argmax(y);
    Ok(-clamp_prob(p[target]).ln())
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `(1 - Y) * D^2 / 2 + Y * max(0, m - D)^2 / 2`.
pub fn contrastive_loss<T: Scalar>(dw: T, y: T, margin: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let hinge = (margin - dw).max(T::zero());
    (T::one() - y) * half * dw * dw + y * half * hinge * hinge
}

/// Derivative of [`contrastive_loss`] with respect to `dw`.
pub fn contrastive_grad<T: Scalar>(dw: T, y: T, margin: T) -> T {
    let hinge = (margin - dw).max(T::zero());
    (T::one() - y) * dw - y * hinge
}

/// `sqrt(sum (e1 - e2)^2 + lambda)`.
pub fn dw_distance<T: Scalar>(e1: &[T], e2: &[T], lambda: T) -> Result<T> {
    if e1.len() != e2.len() {
        return Err(Error::shape(format!("distance between {} and {} dims", e1.len(), e2.len())));
    }
    // Squared differences are symmetric bit-for-bit, so the sum is too.
    let sq: T = e1.iter().zip(e2).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((sq + lambda).sqrt())
}

/// Gradient of [`dw_distance`] with respect to `e1`; the one for `e2` is its negation.
pub fn dw_grad<T: Scalar>(e1: &[T], e2: &[T], dw: T) -> Vec<T> {
    e1.iter().zip(e2).map(|(&a, &b)| (a - b) / dw).collect()
}

/// Mean binary cross-entropy over a `[batch, 1]` sigmoid output.
pub fn bce_batch<T: Scalar>(p: &Tensor<T>, targets: &[T]) -> Result<(f64, Tensor<T>)> {
    if p.len() != targets.len() || targets.is_empty() {
        return Err(Error::shape(format!("bce over {} outputs and {} targets", p.len(), targets.len())));
    }
    let n = T::from_usize(targets.len()).unwrap();
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(p.shape());
    for ((g, &pi), &y) in grad.data_mut().iter_mut().zip(p.data()).zip(targets) {
        loss += bce_loss(pi, y).as_f64();
        *g = bce_grad(pi, y) / n;
    }
    Ok((loss / targets.len() as f64, grad))
}

/// Mean categorical cross-entropy over rows of a softmax output. Rows whose
/// target is `None` are masked out of both loss and gradient.
pub fn cce_batch<T: Scalar>(p: &Tensor<T>, targets: &[Option<usize>]) -> Result<(f64, Tensor<T>)> {
    let k = p.last_dim();
    if p.rows() != targets.len() {
        return Err(Error::shape(format!("cce over {} rows and {} targets", p.rows(), targets.len())));
    }
    let active = targets.iter().filter(|t| t.is_some()).count();
    if active == 0 {
        return Err(Error::EmptyInput);
    }
    let n = T::from_usize(active).unwrap();
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(p.shape());
    for (r, t) in targets.iter().enumerate() {
        if let Some(c) = *t {
            if c >= k {
                return Err(Error::shape(format!("target class {c} out of range {k}")));
            }
            let pc = clamp_prob(p.data()[r * k + c]);
            loss -= pc.ln().as_f64();
            grad.data_mut()[r * k + c] = -(T::one() / pc) / n;
        }
    }
    Ok((loss / active as f64, grad))
}

/// A pair of rows of an embedding batch with its dissimilarity label
/// (0 = same class, 1 = different classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    pub a: usize,
    pub b: usize,
    pub y: u8,
}

/// Mean contrastive loss over `pairs` of rows of `emb` (`[n, d]`) and its
/// gradient with respect to `emb`.
pub fn contrastive_batch<T: Scalar>(
    emb: &Tensor<T>,
    pairs: &[PairIndex],
    margin: f64,
    lambda: f64,
) -> Result<(f64, Tensor<T>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = emb.rows();
    let d = emb.last_dim();
    let (m, l) = (T::from_f64_lossy(margin), T::from_f64_lossy(lambda));
    let scale = T::one() / T::from_usize(pairs.len()).unwrap();
    let mut grad = Tensor::zeros(emb.shape());
    let mut loss = 0.0;
    for p in pairs {
        if p.a >= n || p.b >= n {
            return Err(Error::shape(format!("pair ({}, {}) outside batch of {n}", p.a, p.b)));
        }
        let (ea, eb) = (emb.row(p.a), emb.row(p.b));
        let y = if p.y == 0 { T::zero() } else { T::one() };
        let dw = dw_distance(ea, eb, l)?;
        loss += contrastive_loss(dw, y, m).as_f64();
        let dl = contrastive_grad(dw, y, m) * scale;
        let g = dw_grad(ea, eb, dw);
        let gd = grad.data_mut();
        for k in 0..d {
            gd[p.a * d + k] = gd[p.a * d + k] + dl * g[k];
            gd[p.b * d + k] = gd[p.b * d + k] - dl * g[k];
        }
    }
    Ok((loss / pairs.len() as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5f64, 0.0) - 2f64.ln()).abs() < 1e-12);
        assert!((bce_loss(0.5f64, 1.0) - 2f64.ln()).abs() < 1e-12);
        assert!(bce_loss(1.0f64, 1.0) < 1e-6);
        assert!(bce_loss(0.0f64, 0.0) < 1e-6);
        assert!((bce_loss(0.9f64, 0.0) - 2.302585092994046).abs() < 1e-9);
    }

    #[test]
    fn cce_examples() {
        let uniform = vec![1.0 / 26.0; 26];
        let mut y = vec![0.0f64; 26];
        y[4] = 1.0;
        assert!((cce_loss(&uniform, &y).unwrap() - 26f64.ln()).abs() < 1e-12);
        assert!(cce_loss(&y, &y).unwrap() < 1e-6);
        assert!((cce_loss(&[0.2f64, 0.8], &[1.0, 0.0]).unwrap() - 1.6094379124341003).abs() < 1e-12);
    }

    #[test]
    fn contrastive_examples() {
        assert_eq!(contrastive_loss(2.0f64, 0.0, 1.0), 2.0);
        assert_eq!(contrastive_loss(2.0f64, 1.0, 1.0), 0.0);
        assert_eq!(contrastive_loss(0.5f64, 1.0, 1.0), 0.125);
    }

    #[test]
    fn distance_examples() {
        let a = [0.0f64; 16];
        assert!((dw_distance(&a, &a, DISTANCE_LAMBDA).unwrap() - 1e-3).abs() < 1e-15);
        let mut b = [0.0f64; 16];
        b[0] = 3.0;
        b[1] = 4.0;
        let d = dw_distance(&a, &b, DISTANCE_LAMBDA).unwrap();
        assert!((d - (25.0f64 + 1e-6).sqrt()).abs() < 1e-15);
        assert!((d - 5.0000001).abs() < 1e-9);
    }

    #[test]
    fn masked_rows_do_not_contribute() {
        let p = Tensor::<f64>::new(&[2, 2], vec![0.5, 0.5, 0.9, 0.1]);
        let (loss, grad) = cce_batch(&p, &[Some(0), None]).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert_eq!(&grad.data()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn contrastive_validation() {
        assert!(LossKind::Contrastive { margin: 0.0, lambda: 1e-6 }.validate().is_err());
        assert!(LossKind::Contrastive { margin: 1.0, lambda: 1e-6 }.validate().is_ok());
    }
}
