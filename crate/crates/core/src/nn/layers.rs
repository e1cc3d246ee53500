//! Layer kernels. Every layer works on a leading batch axis; sequence
//! layers take `[batch, steps, channels]`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::{sigmoid, Activation};
use crate::nn::scalar::{MatMut, MatRef};
use crate::nn::{Scalar, Tensor};

/// Architecture descriptor of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Activation,
    },
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
    },
    Lstm {
        units: usize,
        return_sequences: bool,
    },
    Gru {
        units: usize,
        return_sequences: bool,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Dense { units, .. }
            | LayerSpec::Lstm { units, .. }
            | LayerSpec::Gru { units, .. }
                if units == 0 =>
            {
                Err(Error::config("layer with zero units"))
            }
            LayerSpec::Conv1d { filters, kernel, stride, .. } => {
                if stride != 1 {
                    return Err(Error::config(format!("conv1d stride must be 1, got {stride}")));
                }
                if filters == 0 || kernel == 0 {
                    return Err(Error::config("conv1d needs filters > 0 and kernel > 0"));
                }
                Ok(())
            }
            LayerSpec::Dropout { rate } => check_rate(rate),
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::config(format!("dropout rate must lie in [0, 1), got {rate}")))
    }
}

/// Whether stochastic layers are active.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

fn dims3<T: Scalar>(x: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, t, c] => Ok((b, t, c)),
        ref s => Err(Error::shape(format!("{what} expects [batch, steps, channels], got {s:?}"))),
    }
}

fn expect_shape<T: Scalar>(t: &Tensor<T>, want: &[usize], what: &str) -> Result<()> {
    if t.shape() == want {
        Ok(())
    } else {
        Err(Error::shape(format!("{what}: expected {want:?}, got {:?}", t.shape())))
    }
}

fn add_col_sums<T: Scalar>(acc: &mut [T], m: &[T], width: usize) {
    for row in m.chunks(width) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a = *a + v;
        }
    }
}

// ---------------------------------------------------------------- dense

pub struct DenseCache<T> {
    x: Tensor<T>,
    y: Tensor<T>,
}

/// `y = act(x W^T + b)` over the last axis; `w` is `[n_out, n_in]`.
pub fn dense_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    act: Activation,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    let &[n_out, n_in] = w.shape() else {
        return Err(Error::shape(format!("dense kernel must be 2-D, got {:?}", w.shape())));
    };
    expect_shape(b, &[n_out], "dense bias")?;
    if x.last_dim() != n_in || x.shape().is_empty() {
        return Err(Error::shape(format!(
            "dense layer expects last axis {n_in}, got input {:?}",
            x.shape()
        )));
    }
    let rows = x.rows();
    let mut out = Vec::with_capacity(rows * n_out);
    for _ in 0..rows {
        out.extend_from_slice(b.data());
    }
    T::gemm(
        T::one(),
        MatRef::rm(x.data(), rows, n_in),
        MatRef::rm_t(w.data(), n_out, n_in),
        T::one(),
        MatMut::rm(&mut out, rows, n_out),
    );
    act.apply(&mut out, n_out);
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = n_out;
    let y = Tensor::from_vec(&shape, out)?;
    Ok((y.clone(), DenseCache { x: x.clone(), y }))
}

pub fn dense_backward<T: Scalar>(
    cache: DenseCache<T>,
    dy: &Tensor<T>,
    w: &Tensor<T>,
    act: Activation,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let (n_out, n_in) = (w.shape()[0], w.shape()[1]);
    expect_shape(dy, cache.y.shape(), "dense upstream gradient")?;
    let rows = cache.x.rows();
    let mut dz = dy.data().to_vec();
    act.backprop(cache.y.data(), &mut dz, n_out);
    T::gemm(
        T::one(),
        MatRef::rm_t(&dz, rows, n_out),
        MatRef::rm(cache.x.data(), rows, n_in),
        T::one(),
        MatMut::rm(gw.data_mut(), n_out, n_in),
    );
    add_col_sums(gb.data_mut(), &dz, n_out);
    let mut dx = vec![T::zero(); rows * n_in];
    T::gemm(
        T::one(),
        MatRef::rm(&dz, rows, n_out),
        MatRef::rm(w.data(), n_out, n_in),
        T::zero(),
        MatMut::rm(&mut dx, rows, n_in),
    );
    Tensor::from_vec(cache.x.shape(), dx)
}

// ---------------------------------------------------------------- conv1d

pub struct Conv1dCache<T> {
    in_shape: Vec<usize>,
    patches: Vec<T>,
    y: Tensor<T>,
}

/// Valid (unpadded) stride-1 convolution. `w` is `[filters, kernel * c_in]`
/// with element `(f, j * c_in + c)` multiplying `seq[t + j, c]`.
pub fn conv1d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    kernel: usize,
    act: Activation,
) -> Result<(Tensor<T>, Conv1dCache<T>)> {
    let (batch, steps, c_in) = dims3(x, "conv1d")?;
    let filters = b.len();
    expect_shape(w, &[filters, kernel * c_in], "conv1d kernel")?;
    if steps < kernel {
        return Err(Error::InputTooShort { len: steps, kernel });
    }
    let out_steps = steps - kernel + 1;
    let width = kernel * c_in;
    let rows = batch * out_steps;
    let mut patches = Vec::with_capacity(rows * width);
    for bi in 0..batch {
        let sample = &x.data()[bi * steps * c_in..(bi + 1) * steps * c_in];
        for t in 0..out_steps {
            patches.extend_from_slice(&sample[t * c_in..t * c_in + width]);
        }
    }
    let mut out = Vec::with_capacity(rows * filters);
    for _ in 0..rows {
        out.extend_from_slice(b.data());
    }
    T::gemm(
        T::one(),
        MatRef::rm(&patches, rows, width),
        MatRef::rm_t(w.data(), filters, width),
        T::one(),
        MatMut::rm(&mut out, rows, filters),
    );
    act.apply(&mut out, filters);
    let y = Tensor::from_vec(&[batch, out_steps, filters], out)?;
    Ok((y.clone(), Conv1dCache { in_shape: x.shape().to_vec(), patches, y }))
}

pub fn conv1d_backward<T: Scalar>(
    cache: Conv1dCache<T>,
    dy: &Tensor<T>,
    w: &Tensor<T>,
    act: Activation,
    gw: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let (batch, steps, c_in) = (cache.in_shape[0], cache.in_shape[1], cache.in_shape[2]);
    expect_shape(dy, cache.y.shape(), "conv1d upstream gradient")?;
    let filters = w.shape()[0];
    let width = w.shape()[1];
    let out_steps = cache.y.shape()[1];
    let rows = batch * out_steps;
    let mut dz = dy.data().to_vec();
    act.backprop(cache.y.data(), &mut dz, filters);
    T::gemm(
        T::one(),
        MatRef::rm_t(&dz, rows, filters),
        MatRef::rm(&cache.patches, rows, width),
        T::one(),
        MatMut::rm(gw.data_mut(), filters, width),
    );
    add_col_sums(gb.data_mut(), &dz, filters);
    let mut dp = vec![T::zero(); rows * width];
    T::gemm(
        T::one(),
        MatRef::rm(&dz, rows, filters),
        MatRef::rm(w.data(), filters, width),
        T::zero(),
        MatMut::rm(&mut dp, rows, width),
    );
    let mut dx = vec![T::zero(); batch * steps * c_in];
    for bi in 0..batch {
        for t in 0..out_steps {
            let src = &dp[(bi * out_steps + t) * width..(bi * out_steps + t + 1) * width];
            let off = (bi * steps + t) * c_in;
            for (d, &s) in dx[off..off + width].iter_mut().zip(src) {
                *d = *d + s;
            }
        }
    }
    Tensor::from_vec(&cache.in_shape, dx)
}

// ---------------------------------------------------------------- recurrent helpers

/// Projects every `(batch, step)` input row through `w_ih` at once.
/// Rows of the result are ordered `b * steps + t`.
fn project_inputs<T: Scalar>(x: &Tensor<T>, w_ih: &Tensor<T>, gates: usize) -> Vec<T> {
    let rows = x.rows();
    let c = x.last_dim();
    let mut xw = vec![T::zero(); rows * gates];
    T::gemm(
        T::one(),
        MatRef::rm(x.data(), rows, c),
        MatRef::rm(w_ih.data(), c, gates),
        T::zero(),
        MatMut::rm(&mut xw, rows, gates),
    );
    xw
}

/// Shared tail of the recurrent backward passes: input-kernel and bias
/// gradients plus the input gradient from the per-step pre-activation grads.
fn finish_recurrent_backward<T: Scalar>(
    x: &Tensor<T>,
    d_pre: &[T],
    w_ih: &Tensor<T>,
    gates: usize,
    gw_ih: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let rows = x.rows();
    let c = x.last_dim();
    add_col_sums(gb.data_mut(), d_pre, gates);
    T::gemm(
        T::one(),
        MatRef::rm_t(x.data(), rows, c),
        MatRef::rm(d_pre, rows, gates),
        T::one(),
        MatMut::rm(gw_ih.data_mut(), c, gates),
    );
    let mut dx = vec![T::zero(); rows * c];
    T::gemm(
        T::one(),
        MatRef::rm(d_pre, rows, gates),
        MatRef::rm_t(w_ih.data(), c, gates),
        T::zero(),
        MatMut::rm(&mut dx, rows, c),
    );
    Tensor::from_vec(x.shape(), dx)
}

fn collect_outputs<T: Scalar>(
    hs: &[T],
    batch: usize,
    steps: usize,
    hidden: usize,
    return_sequences: bool,
) -> Result<Tensor<T>> {
    if return_sequences {
        let mut y = vec![T::zero(); batch * steps * hidden];
        for t in 0..steps {
            for bi in 0..batch {
                let src = &hs[((t + 1) * batch + bi) * hidden..((t + 1) * batch + bi + 1) * hidden];
                y[(bi * steps + t) * hidden..(bi * steps + t + 1) * hidden].copy_from_slice(src);
            }
        }
        Tensor::from_vec(&[batch, steps, hidden], y)
    } else {
        Tensor::from_vec(&[batch, hidden], hs[steps * batch * hidden..].to_vec())
    }
}

/// Upstream gradient arriving at `h_t` directly from the layer output.
fn output_grad<T: Scalar>(
    dy: &Tensor<T>,
    bi: usize,
    t: usize,
    j: usize,
    steps: usize,
    hidden: usize,
    return_sequences: bool,
) -> T {
    if return_sequences {
        dy.data()[(bi * steps + t) * hidden + j]
    } else if t + 1 == steps {
        dy.data()[bi * hidden + j]
    } else {
        T::zero()
    }
}

fn check_recurrent<T: Scalar>(
    x: &Tensor<T>,
    w_ih: &Tensor<T>,
    w_hh: &Tensor<T>,
    b: &Tensor<T>,
    n_gates: usize,
    what: &str,
) -> Result<(usize, usize, usize, usize)> {
    let (batch, steps, c) = dims3(x, what)?;
    let hidden = w_hh.shape().first().copied().unwrap_or(0);
    let g = n_gates * hidden;
    expect_shape(w_ih, &[c, g], &format!("{what} input kernel"))?;
    expect_shape(w_hh, &[hidden, g], &format!("{what} recurrent kernel"))?;
    expect_shape(b, &[g], &format!("{what} bias"))?;
    if steps == 0 {
        return Err(Error::shape(format!("{what} needs at least one time step")));
    }
    Ok((batch, steps, c, hidden))
}

// ---------------------------------------------------------------- lstm

pub struct LstmCache<T> {
    x: Tensor<T>,
    /// Post-activation gates `[steps][batch][i, f, g, o]`.
    gates: Vec<T>,
    /// Cell states `[steps + 1][batch][hidden]`, entry 0 is the zero state.
    cs: Vec<T>,
    hs: Vec<T>,
    tanh_c: Vec<T>,
    hidden: usize,
    return_sequences: bool,
}

/// LSTM with gate order input, forget, cell, output.
/// `w_ih` is `[c_in, 4h]`, `w_hh` is `[h, 4h]`, `b` is `[4h]`.
pub fn lstm_forward<T: Scalar>(
    x: &Tensor<T>,
    w_ih: &Tensor<T>,
    w_hh: &Tensor<T>,
    b: &Tensor<T>,
    return_sequences: bool,
) -> Result<(Tensor<T>, LstmCache<T>)> {
    let (batch, steps, _, h) = check_recurrent(x, w_ih, w_hh, b, 4, "lstm")?;
    let g = 4 * h;
    let xw = project_inputs(x, w_ih, g);
    let mut gates = vec![T::zero(); steps * batch * g];
    let mut hs = vec![T::zero(); (steps + 1) * batch * h];
    let mut cs = vec![T::zero(); (steps + 1) * batch * h];
    let mut tanh_c = vec![T::zero(); steps * batch * h];
    let bias = b.data();
    let one = T::one();
    for t in 0..steps {
        let gt = &mut gates[t * batch * g..(t + 1) * batch * g];
        let (h_done, h_rest) = hs.split_at_mut((t + 1) * batch * h);
        let h_prev = &h_done[t * batch * h..];
        let h_next = &mut h_rest[..batch * h];
        T::gemm(
            one,
            MatRef::rm(h_prev, batch, h),
            MatRef::rm(w_hh.data(), h, g),
            T::zero(),
            MatMut::rm(gt, batch, g),
        );
        let (c_done, c_rest) = cs.split_at_mut((t + 1) * batch * h);
        let c_prev = &c_done[t * batch * h..];
        let c_next = &mut c_rest[..batch * h];
        for bi in 0..batch {
            let row = &mut gt[bi * g..(bi + 1) * g];
            let xrow = &xw[(bi * steps + t) * g..(bi * steps + t + 1) * g];
            for j in 0..g {
                row[j] = row[j] + xrow[j] + bias[j];
            }
            for j in 0..h {
                let i_g = sigmoid(row[j]);
                let f_g = sigmoid(row[h + j]);
                let c_g = row[2 * h + j].tanh();
                let o_g = sigmoid(row[3 * h + j]);
                row[j] = i_g;
                row[h + j] = f_g;
                row[2 * h + j] = c_g;
                row[3 * h + j] = o_g;
                let c = f_g * c_prev[bi * h + j] + i_g * c_g;
                let tc = c.tanh();
                c_next[bi * h + j] = c;
                tanh_c[(t * batch + bi) * h + j] = tc;
                h_next[bi * h + j] = o_g * tc;
            }
        }
    }
    let y = collect_outputs(&hs, batch, steps, h, return_sequences)?;
    Ok((y, LstmCache { x: x.clone(), gates, cs, hs, tanh_c, hidden: h, return_sequences }))
}

pub fn lstm_backward<T: Scalar>(
    cache: LstmCache<T>,
    dy: &Tensor<T>,
    w_ih: &Tensor<T>,
    w_hh: &Tensor<T>,
    gw_ih: &mut Tensor<T>,
    gw_hh: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let (batch, steps) = (cache.x.shape()[0], cache.x.shape()[1]);
    let h = cache.hidden;
    let g = 4 * h;
    let want: Vec<usize> =
        if cache.return_sequences { vec![batch, steps, h] } else { vec![batch, h] };
    expect_shape(dy, &want, "lstm upstream gradient")?;
    let one = T::one();
    let w_hh_t = transpose(w_hh.data(), h, g);
    // Pre-activation gradients, time-major so one product covers every step.
    let mut da_all = vec![T::zero(); steps * batch * g];
    let mut dh_next = vec![T::zero(); batch * h];
    let mut dc_next = vec![T::zero(); batch * h];
    for t in (0..steps).rev() {
        let gt = &cache.gates[t * batch * g..(t + 1) * batch * g];
        let c_prev = &cache.cs[t * batch * h..(t + 1) * batch * h];
        let da = &mut da_all[t * batch * g..(t + 1) * batch * g];
        for bi in 0..batch {
            for j in 0..h {
                let k = bi * h + j;
                let i_g = gt[bi * g + j];
                let f_g = gt[bi * g + h + j];
                let c_g = gt[bi * g + 2 * h + j];
                let o_g = gt[bi * g + 3 * h + j];
                let tc = cache.tanh_c[(t * batch + bi) * h + j];
                let dh = dh_next[k] + output_grad(dy, bi, t, j, steps, h, cache.return_sequences);
                let dc = dc_next[k] + dh * o_g * (one - tc * tc);
                da[bi * g + j] = dc * c_g * i_g * (one - i_g);
                da[bi * g + h + j] = dc * c_prev[k] * f_g * (one - f_g);
                da[bi * g + 2 * h + j] = dc * i_g * (one - c_g * c_g);
                da[bi * g + 3 * h + j] = dh * tc * o_g * (one - o_g);
                dc_next[k] = dc * f_g;
            }
        }
        T::gemm(
            one,
            MatRef::rm(da, batch, g),
            MatRef::rm(&w_hh_t, g, h),
            T::zero(),
            MatMut::rm(&mut dh_next, batch, h),
        );
    }
    let rows = steps * batch;
    T::gemm(
        one,
        MatRef::rm_t(&cache.hs[..rows * h], rows, h),
        MatRef::rm(&da_all, rows, g),
        one,
        MatMut::rm(gw_hh.data_mut(), h, g),
    );
    let d_pre = batch_major(&da_all, batch, steps, g);
    finish_recurrent_backward(&cache.x, &d_pre, w_ih, g, gw_ih, gb)
}

/// Row-major transpose of an `[r, c]` matrix.
fn transpose<T: Scalar>(a: &[T], r: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

/// `[steps][batch][w]` to `[batch][steps][w]`.
fn batch_major<T: Scalar>(a: &[T], batch: usize, steps: usize, w: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for t in 0..steps {
        for bi in 0..batch {
            out[(bi * steps + t) * w..(bi * steps + t + 1) * w]
                .copy_from_slice(&a[(t * batch + bi) * w..(t * batch + bi + 1) * w]);
        }
    }
    out
}

// ---------------------------------------------------------------- gru

pub struct GruCache<T> {
    x: Tensor<T>,
    /// `[steps][batch][z, r, n]`
    gates: Vec<T>,
    /// `r * h_prev` per step, `[steps][batch][hidden]`.
    rh: Vec<T>,
    hs: Vec<T>,
    hidden: usize,
    return_sequences: bool,
}

/// GRU with update gate `z`, reset gate `r` applied before the recurrent
/// product, and `h' = z * h + (1 - z) * n`. Kernels are `[c_in, 3h]` and
/// `[h, 3h]` in gate order z, r, n.
pub fn gru_forward<T: Scalar>(
    x: &Tensor<T>,
    w_ih: &Tensor<T>,
    w_hh: &Tensor<T>,
    b: &Tensor<T>,
    return_sequences: bool,
) -> Result<(Tensor<T>, GruCache<T>)> {
    let (batch, steps, _, h) = check_recurrent(x, w_ih, w_hh, b, 3, "gru")?;
    let g = 3 * h;
    let xw = project_inputs(x, w_ih, g);
    let mut gates = vec![T::zero(); steps * batch * g];
    let mut rh = vec![T::zero(); steps * batch * h];
    let mut hs = vec![T::zero(); (steps + 1) * batch * h];
    let mut hu = vec![T::zero(); batch * 2 * h];
    let mut rn = vec![T::zero(); batch * h];
    let bias = b.data();
    let one = T::one();
    for t in 0..steps {
        let (h_done, h_rest) = hs.split_at_mut((t + 1) * batch * h);
        let h_prev = &h_done[t * batch * h..];
        let h_next = &mut h_rest[..batch * h];
        T::gemm(
            one,
            MatRef::rm(h_prev, batch, h),
            MatRef::strided(w_hh.data(), h, 2 * h, g, 1),
            T::zero(),
            MatMut::rm(&mut hu, batch, 2 * h),
        );
        let gt = &mut gates[t * batch * g..(t + 1) * batch * g];
        let rht = &mut rh[t * batch * h..(t + 1) * batch * h];
        for bi in 0..batch {
            let xrow = &xw[(bi * steps + t) * g..(bi * steps + t + 1) * g];
            for j in 0..2 * h {
                gt[bi * g + j] = sigmoid(xrow[j] + bias[j] + hu[bi * 2 * h + j]);
            }
            for j in 0..h {
                rht[bi * h + j] = gt[bi * g + h + j] * h_prev[bi * h + j];
            }
        }
        T::gemm(
            one,
            MatRef::rm(rht, batch, h),
            MatRef::strided(&w_hh.data()[2 * h..], h, h, g, 1),
            T::zero(),
            MatMut::rm(&mut rn, batch, h),
        );
        for bi in 0..batch {
            let xrow = &xw[(bi * steps + t) * g..(bi * steps + t + 1) * g];
            for j in 0..h {
                let n = (xrow[2 * h + j] + bias[2 * h + j] + rn[bi * h + j]).tanh();
                gt[bi * g + 2 * h + j] = n;
                let z = gt[bi * g + j];
                h_next[bi * h + j] = z * h_prev[bi * h + j] + (one - z) * n;
            }
        }
    }
    let y = collect_outputs(&hs, batch, steps, h, return_sequences)?;
    Ok((y, GruCache { x: x.clone(), gates, rh, hs, hidden: h, return_sequences }))
}

pub fn gru_backward<T: Scalar>(
    cache: GruCache<T>,
    dy: &Tensor<T>,
    w_ih: &Tensor<T>,
    w_hh: &Tensor<T>,
    gw_ih: &mut Tensor<T>,
    gw_hh: &mut Tensor<T>,
    gb: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let (batch, steps) = (cache.x.shape()[0], cache.x.shape()[1]);
    let h = cache.hidden;
    let g = 3 * h;
    let want: Vec<usize> =
        if cache.return_sequences { vec![batch, steps, h] } else { vec![batch, h] };
    expect_shape(dy, &want, "gru upstream gradient")?;
    let one = T::one();
    let w_hh_t = transpose(w_hh.data(), h, g);
    let mut da_all = vec![T::zero(); steps * batch * g];
    let mut dh_next = vec![T::zero(); batch * h];
    let mut drh = vec![T::zero(); batch * h];
    let mut dhp = vec![T::zero(); batch * h];
    for t in (0..steps).rev() {
        let gt = &cache.gates[t * batch * g..(t + 1) * batch * g];
        let h_prev = &cache.hs[t * batch * h..(t + 1) * batch * h];
        let da = &mut da_all[t * batch * g..(t + 1) * batch * g];
        for bi in 0..batch {
            for j in 0..h {
                let k = bi * h + j;
                let z = gt[bi * g + j];
                let n = gt[bi * g + 2 * h + j];
                let dh = dh_next[k] + output_grad(dy, bi, t, j, steps, h, cache.return_sequences);
                let dz = dh * (h_prev[k] - n);
                let dn = dh * (one - z);
                dhp[k] = dh * z;
                da[bi * g + j] = dz * z * (one - z);
                da[bi * g + 2 * h + j] = dn * (one - n * n);
            }
        }
        // Candidate path through the reset-gated recurrent product.
        T::gemm(
            one,
            MatRef::strided(&da[2 * h..], batch, h, g, 1),
            MatRef::rm(&w_hh_t[2 * h * h..], h, h),
            T::zero(),
            MatMut::rm(&mut drh, batch, h),
        );
        for bi in 0..batch {
            for j in 0..h {
                let k = bi * h + j;
                let r = gt[bi * g + h + j];
                let dr = drh[k] * h_prev[k];
                dhp[k] = dhp[k] + drh[k] * r;
                da[bi * g + h + j] = dr * r * (one - r);
            }
        }
        T::gemm(
            one,
            MatRef::strided(da, batch, 2 * h, g, 1),
            MatRef::rm(&w_hh_t[..2 * h * h], 2 * h, h),
            one,
            MatMut::rm(&mut dhp, batch, h),
        );
        dh_next.copy_from_slice(&dhp);
    }
    let rows = steps * batch;
    T::gemm(
        one,
        MatRef::rm_t(&cache.hs[..rows * h], rows, h),
        MatRef::strided(&da_all, rows, 2 * h, g, 1),
        one,
        MatMut::strided(gw_hh.data_mut(), h, 2 * h, g, 1),
    );
    T::gemm(
        one,
        MatRef::rm_t(&cache.rh, rows, h),
        MatRef::strided(&da_all[2 * h..], rows, h, g, 1),
        one,
        MatMut::strided(&mut gw_hh.data_mut()[2 * h..], h, h, g, 1),
    );
    let d_pre = batch_major(&da_all, batch, steps, g);
    finish_recurrent_backward(&cache.x, &d_pre, w_ih, g, gw_ih, gb)
}

// ---------------------------------------------------------------- dropout

/// Inverted dropout. Returns the output and the scaling mask (absent when
/// the layer is a no-op).
pub fn dropout_apply<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut dyn RngCore,
    training: bool,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let scale = T::from_f64_lossy(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { scale })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::from_vec(x.shape(), data)?, Some(mask)))
}
