use serde::{Deserialize, Serialize};

use crate::nn::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Softmax,
    Relu,
    Tanh,
    Identity,
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in row.iter_mut() {
        *x = *x / sum;
    }
}

impl Activation {
    /// Applies the activation to rows of width `width` in place.
    pub fn apply<T: Scalar>(self, z: &mut [T], width: usize) {
        match self {
            Activation::Identity => {}
            Activation::Sigmoid => z.iter_mut().for_each(|x| *x = sigmoid(*x)),
            Activation::Tanh => z.iter_mut().for_each(|x| *x = x.tanh()),
            Activation::Relu => z.iter_mut().for_each(|x| *x = x.max(T::zero())),
            Activation::Softmax => z.chunks_mut(width).for_each(softmax_in_place),
        }
    }

    /// Turns the upstream gradient `dy` into the pre-activation gradient,
    /// given the activation output `y`.
    pub fn backprop<T: Scalar>(self, y: &[T], dy: &mut [T], width: usize) {
        let one = T::one();
        match self {
            Activation::Identity => {}
            Activation::Sigmoid => {
                for (d, &s) in dy.iter_mut().zip(y) {
                    *d = *d * s * (one - s);
                }
            }
            Activation::Tanh => {
                for (d, &t) in dy.iter_mut().zip(y) {
                    *d = *d * (one - t * t);
                }
            }
            Activation::Relu => {
                for (d, &r) in dy.iter_mut().zip(y) {
                    if r <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            Activation::Softmax => {
                for (drow, yrow) in dy.chunks_mut(width).zip(y.chunks(width)) {
                    let dot: T = drow.iter().zip(yrow).map(|(&a, &b)| a * b).sum();
                    for (d, &p) in drow.iter_mut().zip(yrow) {
                        *d = p * (*d - dot);
                    }
                }
            }
        }
    }
}
