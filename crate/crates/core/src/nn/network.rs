use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::layers::{self, LayerSpec, Mode};
use crate::nn::params::{glorot_uniform, orthogonal};
use crate::nn::{Activation, ParamId, ParamStore, Scalar, Tensor};

#[derive(Debug, Clone)]
enum Layer {
    Dense {
        w: ParamId,
        b: ParamId,
        act: Activation,
    },
    Conv1d {
        w: ParamId,
        b: ParamId,
        kernel: usize,
        act: Activation,
    },
    Lstm {
        w_ih: ParamId,
        w_hh: ParamId,
        b: ParamId,
        return_sequences: bool,
    },
    Gru {
        w_ih: ParamId,
        w_hh: ParamId,
        b: ParamId,
        return_sequences: bool,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
}

enum Cache<T> {
    Dense(layers::DenseCache<T>),
    Conv1d(layers::Conv1dCache<T>),
    Lstm(layers::LstmCache<T>),
    Gru(layers::GruCache<T>),
    Dropout(Option<Vec<T>>),
    Flatten(Vec<usize>),
}

/// Intermediate values recorded by a forward pass, consumed by `backward`.
pub struct Tape<T> {
    caches: Vec<Cache<T>>,
}

/// A feed-forward stack of layers whose parameters live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    output_shape: Vec<usize>,
    variable_steps: bool,
}

impl Network {
    /// Registers freshly initialised parameters for `specs` in `store`,
    /// naming them `{prefix}{index}.{kind}.{tensor}`.
    pub fn build<T: Scalar, R: Rng + ?Sized>(
        input_shape: &[usize],
        specs: &[LayerSpec],
        prefix: &str,
        store: &mut ParamStore<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let name = |kind: &str, t: &str| format!("{prefix}{i}.{kind}.{t}");
            let layer = match *spec {
                LayerSpec::Dense { units, activation } => {
                    let n_in = *shape
                        .last()
                        .ok_or_else(|| Error::shape("dense layer on scalar input"))?;
                    let w = store.add(
                        name("dense", "kernel"),
                        glorot_uniform(&[units, n_in], n_in, units, rng),
                        true,
                    )?;
                    let b = store.add(name("dense", "bias"), Tensor::zeros(&[units]), false)?;
                    *shape.last_mut().unwrap() = units;
                    Layer::Dense { w, b, act: activation }
                }
                LayerSpec::Conv1d { filters, kernel, activation, .. } => {
                    let [steps, c_in] = shape[..] else {
                        return Err(Error::shape(format!("conv1d needs [steps, channels], got {shape:?}")));
                    };
                    if steps < kernel {
                        return Err(Error::InputTooShort { len: steps, kernel });
                    }
                    let w = store.add(
                        name("conv1d", "kernel"),
                        glorot_uniform(&[filters, kernel * c_in], kernel * c_in, kernel * filters, rng),
                        true,
                    )?;
                    let b = store.add(name("conv1d", "bias"), Tensor::zeros(&[filters]), false)?;
                    shape = vec![steps - kernel + 1, filters];
                    Layer::Conv1d { w, b, kernel, act: activation }
                }
                LayerSpec::Lstm { units, return_sequences } => {
                    let [steps, c_in] = shape[..] else {
                        return Err(Error::shape(format!("lstm needs [steps, channels], got {shape:?}")));
                    };
                    let g = 4 * units;
                    let w_ih = store.add(name("lstm", "kernel"), glorot_uniform(&[c_in, g], c_in, g, rng), true)?;
                    let w_hh = store.add(name("lstm", "recurrent"), orthogonal(units, g, rng), true)?;
                    let mut bias = Tensor::zeros(&[g]);
                    bias.data_mut()[units..2 * units].iter_mut().for_each(|v| *v = T::one());
                    let b = store.add(name("lstm", "bias"), bias, false)?;
                    shape = if return_sequences { vec![steps, units] } else { vec![units] };
                    Layer::Lstm { w_ih, w_hh, b, return_sequences }
                }
                LayerSpec::Gru { units, return_sequences } => {
                    let [steps, c_in] = shape[..] else {
                        return Err(Error::shape(format!("gru needs [steps, channels], got {shape:?}")));
                    };
                    let g = 3 * units;
                    let w_ih = store.add(name("gru", "kernel"), glorot_uniform(&[c_in, g], c_in, g, rng), true)?;
                    let w_hh = store.add(name("gru", "recurrent"), orthogonal(units, g, rng), true)?;
                    let b = store.add(name("gru", "bias"), Tensor::zeros(&[g]), false)?;
                    shape = if return_sequences { vec![steps, units] } else { vec![units] };
                    Layer::Gru { w_ih, w_hh, b, return_sequences }
                }
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::Flatten => {
                    shape = vec![shape.iter().product()];
                    Layer::Flatten
                }
            };
            layers.push(layer);
        }
        // Without conv or flatten layers nothing depends on the sequence length.
        let variable_steps = input_shape.len() == 2
            && specs.iter().all(|s| {
                matches!(s, LayerSpec::Lstm { .. } | LayerSpec::Gru { .. } | LayerSpec::Dense { .. } | LayerSpec::Dropout { .. })
            });
        Ok(Network {
            input_shape: input_shape.to_vec(),
            specs: specs.to_vec(),
            layers,
            output_shape: shape,
            variable_steps,
        })
    }

    /// Per-sample input shape (without the batch axis).
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Whether the time axis of the input may differ from the built shape.
    pub fn variable_steps(&self) -> bool {
        self.variable_steps
    }

    fn check_input<T: Scalar>(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        let ok = if self.variable_steps {
            s.len() == 3 && s[1] > 0 && s[2] == self.input_shape[1]
        } else {
            s.len() == self.input_shape.len() + 1 && s[1..] == self.input_shape[..]
        };
        if !ok {
            return Err(Error::shape(format!(
                "network expects [batch, {:?}], got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
        mut mode: Mode<'_>,
    ) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, cache) = match *layer {
                Layer::Dense { w, b, act } => {
                    let (y, c) = layers::dense_forward(&cur, store.value(w), store.value(b), act)?;
                    (y, Cache::Dense(c))
                }
                Layer::Conv1d { w, b, kernel, act } => {
                    let (y, c) = layers::conv1d_forward(&cur, store.value(w), store.value(b), kernel, act)?;
                    (y, Cache::Conv1d(c))
                }
                Layer::Lstm { w_ih, w_hh, b, return_sequences } => {
                    let (y, c) = layers::lstm_forward(
                        &cur,
                        store.value(w_ih),
                        store.value(w_hh),
                        store.value(b),
                        return_sequences,
                    )?;
                    (y, Cache::Lstm(c))
                }
                Layer::Gru { w_ih, w_hh, b, return_sequences } => {
                    let (y, c) = layers::gru_forward(
                        &cur,
                        store.value(w_ih),
                        store.value(w_hh),
                        store.value(b),
                        return_sequences,
                    )?;
                    (y, Cache::Gru(c))
                }
                Layer::Dropout { rate } => match mode {
                    Mode::Train(ref mut rng) => {
                        let (y, mask) = layers::dropout_apply(&cur, rate, &mut **rng, true)?;
                        (y, Cache::Dropout(mask))
                    }
                    Mode::Eval => (cur, Cache::Dropout(None)),
                },
                Layer::Flatten => {
                    let in_shape = cur.shape().to_vec();
                    let batch = in_shape[0];
                    let width = cur.len() / batch.max(1);
                    (cur.reshape(&[batch, width])?, Cache::Flatten(in_shape))
                }
            };
            caches.push(cache);
            cur = next;
        }
        Ok((cur, Tape { caches }))
    }

    /// Inference pass (dropout disabled).
    pub fn predict<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward(store, x, Mode::Eval).map(|(y, _)| y)
    }

    /// Back-propagates `dy`, accumulating parameter gradients into `store`.
    /// Returns the gradient with respect to the network input.
    pub fn backward<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        tape: Tape<T>,
        dy: Tensor<T>,
    ) -> Result<Tensor<T>> {
        if tape.caches.len() != self.layers.len() {
            return Err(Error::shape("tape does not belong to this network"));
        }
        let mut grad = dy;
        for (layer, cache) in self.layers.iter().zip(tape.caches).rev() {
            grad = match (layer, cache) {
                (&Layer::Dense { w, b, act }, Cache::Dense(c)) => {
                    let (mut gw, mut gb) = (take_grad(store, w), take_grad(store, b));
                    let dx = layers::dense_backward(c, &grad, store.value(w), act, &mut gw, &mut gb);
                    put_grads(store, [(w, gw), (b, gb)]);
                    dx?
                }
                (&Layer::Conv1d { w, b, act, .. }, Cache::Conv1d(c)) => {
                    let (mut gw, mut gb) = (take_grad(store, w), take_grad(store, b));
                    let dx = layers::conv1d_backward(c, &grad, store.value(w), act, &mut gw, &mut gb);
                    put_grads(store, [(w, gw), (b, gb)]);
                    dx?
                }
                (&Layer::Lstm { w_ih, w_hh, b, .. }, Cache::Lstm(c)) => {
                    let (mut gi, mut gh, mut gb) =
                        (take_grad(store, w_ih), take_grad(store, w_hh), take_grad(store, b));
                    let dx = layers::lstm_backward(
                        c,
                        &grad,
                        store.value(w_ih),
                        store.value(w_hh),
                        &mut gi,
                        &mut gh,
                        &mut gb,
                    );
                    put_grads(store, [(w_ih, gi), (w_hh, gh), (b, gb)]);
                    dx?
                }
                (&Layer::Gru { w_ih, w_hh, b, .. }, Cache::Gru(c)) => {
                    let (mut gi, mut gh, mut gb) =
                        (take_grad(store, w_ih), take_grad(store, w_hh), take_grad(store, b));
                    let dx = layers::gru_backward(
                        c,
                        &grad,
                        store.value(w_ih),
                        store.value(w_hh),
                        &mut gi,
                        &mut gh,
                        &mut gb,
                    );
                    put_grads(store, [(w_ih, gi), (w_hh, gh), (b, gb)]);
                    dx?
                }
                (Layer::Dropout { .. }, Cache::Dropout(mask)) => match mask {
                    Some(m) => {
                        let mut g = grad;
                        for (d, &k) in g.data_mut().iter_mut().zip(&m) {
                            *d = *d * k;
                        }
                        g
                    }
                    None => grad,
                },
                (Layer::Flatten, Cache::Flatten(shape)) => grad.reshape(&shape)?,
                _ => return Err(Error::shape("tape does not belong to this network")),
            };
        }
        Ok(grad)
    }
}

// Gradients are moved out while the kernels borrow the values immutably.
fn take_grad<T: Scalar>(store: &mut ParamStore<T>, id: ParamId) -> Tensor<T> {
    std::mem::replace(store.grad_mut(id), Tensor::zeros(&[0]))
}

fn put_grads<T: Scalar, const N: usize>(store: &mut ParamStore<T>, grads: [(ParamId, Tensor<T>); N]) {
    for (id, g) in grads {
        *store.grad_mut(id) = g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conv_specs() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv1d { filters: 32, kernel: 2, stride: 1, activation: Activation::Relu },
            LayerSpec::Dropout { rate: 0.2 },
            LayerSpec::Conv1d { filters: 32, kernel: 3, stride: 1, activation: Activation::Relu },
            LayerSpec::Dropout { rate: 0.2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 1, activation: Activation::Sigmoid },
        ]
    }

    #[test]
    fn conv_stack_shape_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f32>::new();
        let net = Network::build(&[15, 27], &conv_specs(), "", &mut store, &mut rng).unwrap();
        assert_eq!(net.output_shape(), &[1]);
        let y = net.predict(&store, &Tensor::zeros(&[3, 15, 27])).unwrap();
        assert_eq!(y.shape(), &[3, 1]);
        // 15x27 -> 14x32 -> 12x32 -> 384 -> 1
        assert_eq!(store.value(store.id("5.dense.kernel").unwrap()).shape(), &[1, 384]);
    }

    #[test]
    fn rejects_stride_other_than_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f32>::new();
        let specs = [LayerSpec::Conv1d { filters: 4, kernel: 2, stride: 2, activation: Activation::Relu }];
        assert!(matches!(
            Network::build(&[15, 27], &specs, "", &mut store, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::<f32>::new();
        let net = Network::build(&[15, 27], &conv_specs(), "", &mut store, &mut rng).unwrap();
        let x = Tensor::new(&[2, 15, 27], (0..810).map(|i| ((i * 7) % 13) as f32 / 13.0).collect());
        let a = net.predict(&store, &x).unwrap();
        let b = net.predict(&store, &x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn recurrent_stacks_accept_any_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f32>::new();
        let specs = [
            LayerSpec::Lstm { units: 5, return_sequences: true },
            LayerSpec::Dense { units: 3, activation: Activation::Softmax },
        ];
        let net = Network::build(&[15, 4], &specs, "", &mut store, &mut rng).unwrap();
        assert!(net.variable_steps());
        let x = Tensor::new(&[2, 6, 4], (0..48).map(|i| (i % 5) as f32 / 5.0).collect());
        assert_eq!(net.predict(&store, &x).unwrap().shape(), &[2, 6, 3]);
        // Causal: a prefix gives the same outputs as the full sequence.
        let prefix = Tensor::new(&[1, 2, 4], x.data()[..8].to_vec());
        let full = net.predict(&store, &x).unwrap();
        assert_eq!(net.predict(&store, &prefix).unwrap().data(), &full.data()[..6]);
        assert!(net.predict(&store, &Tensor::zeros(&[1, 3, 5])).is_err());

        let mut store = ParamStore::<f32>::new();
        let conv = Network::build(&[15, 27], &conv_specs(), "", &mut store, &mut rng).unwrap();
        assert!(!conv.variable_steps());
        assert!(conv.predict(&store, &Tensor::zeros(&[1, 14, 27])).is_err());
    }
}
