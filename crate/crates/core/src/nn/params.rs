use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Index of an entry inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    /// Whether L2 weight decay applies (kernels yes, biases no).
    pub decay: bool,
}

/// First and second moment buffers kept by the optimizers.
#[derive(Debug, Clone)]
pub struct Moments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

/// Named trainable tensors, their gradients and optimizer state.
#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    moments: Vec<Moments<T>>,
    step: u64,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new(), moments: Vec::new(), step: 0 }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, decay: bool) -> Result<ParamId> {
        let name = name.into();
        if self.id(&name).is_some() {
            return Err(Error::config(format!("duplicate parameter name `{name}`")));
        }
        let grad = Tensor::zeros(value.shape());
        let n = value.len();
        self.params.push(Param { name, value, grad, decay });
        self.moments.push(Moments { m: vec![T::zero(); n], v: vec![T::zero(); n] });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].grad
    }

    /// Splits the store into value and gradient halves for a backward pass.
    pub fn value_and_grad(&mut self, id: ParamId) -> (&Tensor<T>, &mut Tensor<T>) {
        let p = &mut self.params[id.0];
        (&p.value, &mut p.grad)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub(crate) fn optimizer_parts(&mut self) -> (&mut [Param<T>], &mut [Moments<T>], &mut u64) {
        (&mut self.params, &mut self.moments, &mut self.step)
    }

    /// Copies values into a store of another precision. Gradients and
    /// optimizer state start from zero.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for p in &self.params {
            out.add(p.name.clone(), p.value.cast(), p.decay).expect("unique names");
        }
        out
    }

    /// Overwrites the value of `name`, keeping the registered shape.
    pub fn set_value(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::Artifact(format!("unknown parameter `{name}`")))?;
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::shape(format!(
                "parameter `{name}` has shape {:?}, got {:?}",
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }
}

/// Glorot-uniform initialisation for a kernel with the given fans.
pub fn glorot_uniform<T: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(rng.random_range(-limit..limit)))
        .collect();
    Tensor::new(shape, data)
}

/// Random `rows x cols` matrix with orthonormal rows (or columns when
/// `rows > cols`), built by Gram-Schmidt on a Gaussian sample.
pub fn orthogonal<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor<T> {
    let (n, d) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mut data = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let x = if rows <= cols { basis[i][j] } else { basis[j][i] };
            data[i * cols + j] = T::from_f64_lossy(x);
        }
    }
    Tensor::new(&[rows, cols], data)
}
