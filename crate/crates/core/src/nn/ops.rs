//! Forward and backward kernels for each layer kind.
//!
//! Layouts follow the usual channels-last conventions: conv inputs are
//! `h × w × c`, conv kernels `kh × kw × c_in × c_out`, GRU kernels
//! `f × 3u` with gate blocks ordered update, reset, candidate.

use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// Probabilities are clamped into `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> Result<(), NnError> {
    if t.rank() != rank {
        return Err(NnError::ShapeMismatch(format!(
            "{what} must have rank {rank}, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Output size of a valid (unpadded) strided window.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if input < kernel || stride == 0 || kernel == 0 {
        None
    } else {
        Some((input - kernel) / stride + 1)
    }
}

/// Valid cross-correlation (no kernel flip).
pub fn conv2d_forward(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: (usize, usize),
) -> Result<Tensor, NnError> {
    expect_rank(x, 3, "conv input")?;
    expect_rank(kernel, 4, "conv kernel")?;
    let (h, w, c_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (kh, kw, k_in, c_out) = (
        kernel.shape()[0],
        kernel.shape()[1],
        kernel.shape()[2],
        kernel.shape()[3],
    );
    if k_in != c_in || bias.shape() != [c_out] {
        return Err(NnError::ShapeMismatch(format!(
            "conv input {:?}, kernel {:?}, bias {:?}",
            x.shape(),
            kernel.shape(),
            bias.shape()
        )));
    }
    let (oh, ow) = match (conv_out_dim(h, kh, stride.0), conv_out_dim(w, kw, stride.1)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(NnError::ShapeMismatch(format!(
                "conv kernel {kh}×{kw} stride {stride:?} does not fit input {h}×{w}"
            )))
        }
    };
    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![0.0; oh * ow * c_out];
    for i in 0..oh {
        for j in 0..ow {
            let acc = &mut out[(i * ow + j) * c_out..(i * ow + j + 1) * c_out];
            acc.copy_from_slice(bias.data());
            for di in 0..kh {
                let row = i * stride.0 + di;
                for dj in 0..kw {
                    let col = j * stride.1 + dj;
                    let xs = &xd[(row * w + col) * c_in..(row * w + col + 1) * c_in];
                    let kbase = (di * kw + dj) * c_in * c_out;
                    for (ci, &xv) in xs.iter().enumerate() {
                        let krow = &kd[kbase + ci * c_out..kbase + (ci + 1) * c_out];
                        for (a, &k) in acc.iter_mut().zip(krow) {
                            *a += xv * k;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![oh, ow, c_out], out)
}

/// Accumulates kernel and bias gradients; returns the input gradient.
pub fn conv2d_backward(
    x: &Tensor,
    kernel: &Tensor,
    stride: (usize, usize),
    grad_out: &Tensor,
    grad_kernel: &mut Tensor,
    grad_bias: &mut Tensor,
) -> Tensor {
    let (w, c_in) = (x.shape()[1], x.shape()[2]);
    let (kh, kw, c_out) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[3]);
    let (oh, ow) = (grad_out.shape()[0], grad_out.shape()[1]);
    let xd = x.data();
    let kd = kernel.data();
    let gd = grad_out.data();
    let mut gx = Tensor::zeros(x.shape());
    {
        let gxd = gx.data_mut();
        let gkd = grad_kernel.data_mut();
        for i in 0..oh {
            for j in 0..ow {
                let g = &gd[(i * ow + j) * c_out..(i * ow + j + 1) * c_out];
                for di in 0..kh {
                    let row = i * stride.0 + di;
                    for dj in 0..kw {
                        let col = j * stride.1 + dj;
                        let xoff = (row * w + col) * c_in;
                        let kbase = (di * kw + dj) * c_in * c_out;
                        for ci in 0..c_in {
                            let xv = xd[xoff + ci];
                            let kslice = kbase + ci * c_out..kbase + (ci + 1) * c_out;
                            let mut dx = 0.0;
                            for ((gk, &k), &gv) in
                                gkd[kslice.clone()].iter_mut().zip(&kd[kslice]).zip(g)
                            {
                                *gk += xv * gv;
                                dx += k * gv;
                            }
                            gxd[xoff + ci] += dx;
                        }
                    }
                }
            }
        }
    }
    let gb = grad_bias.data_mut();
    for cell in gd.chunks_exact(c_out) {
        for (b, &g) in gb.iter_mut().zip(cell) {
            *b += g;
        }
    }
    gx
}

/// `activation(x · W + b)` for a vector input; `None` means linear.
pub fn dense_forward(
    x: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    activation: Option<Activation>,
) -> Result<Tensor, NnError> {
    expect_rank(x, 1, "dense input")?;
    expect_rank(weights, 2, "dense weights")?;
    let (f, u) = (weights.shape()[0], weights.shape()[1]);
    if x.len() != f || bias.shape() != [u] {
        return Err(NnError::ShapeMismatch(format!(
            "dense input {:?}, weights {:?}, bias {:?}",
            x.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let mut out = bias.data().to_vec();
    for (i, &xv) in x.data().iter().enumerate() {
        for (o, &wv) in out.iter_mut().zip(&weights.data()[i * u..(i + 1) * u]) {
            *o += xv * wv;
        }
    }
    if let Some(act) = activation {
        out.iter_mut().for_each(|v| *v = act.apply(*v));
    }
    Ok(Tensor::scalar_vec(out))
}

/// Backward of a linear dense layer.
pub fn dense_backward(
    x: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    grad_weights: &mut Tensor,
    grad_bias: &mut Tensor,
) -> Tensor {
    let u = weights.shape()[1];
    let g = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let gw = grad_weights.data_mut();
    for (i, &xv) in x.data().iter().enumerate() {
        let wrow = &weights.data()[i * u..(i + 1) * u];
        let gwrow = &mut gw[i * u..(i + 1) * u];
        let mut acc = 0.0;
        for ((gwv, &wv), &gv) in gwrow.iter_mut().zip(wrow).zip(g) {
            *gwv += xv * gv;
            acc += wv * gv;
        }
        gx[i] = acc;
    }
    for (b, &gv) in grad_bias.data_mut().iter_mut().zip(g) {
        *b += gv;
    }
    Tensor::scalar_vec(gx)
}

/// Values a GRU keeps from its forward pass for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruTrace {
    /// `h_prev[t]` is the state entering step `t`.
    h_prev: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    candidate: Vec<Vec<f64>>,
}

fn gru_check(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b: &Tensor,
) -> Result<(usize, usize, usize), NnError> {
    expect_rank(x, 2, "GRU input")?;
    let (steps, f) = (x.shape()[0], x.shape()[1]);
    let units = u.shape().first().copied().unwrap_or(0);
    if w.shape() != [f, 3 * units] || u.shape() != [units, 3 * units] || b.shape() != [3 * units] {
        return Err(NnError::ShapeMismatch(format!(
            "GRU input {:?}, kernel {:?}, recurrent {:?}, bias {:?}",
            x.shape(),
            w.shape(),
            u.shape(),
            b.shape()
        )));
    }
    Ok((steps, f, units))
}

/// `out[j] += Σ_i v[i] · m[i, offset + j]` for a row-major matrix with `cols` columns.
fn vec_mat_acc(v: &[f64], m: &[f64], cols: usize, offset: usize, out: &mut [f64]) {
    for (i, &vi) in v.iter().enumerate() {
        let row = &m[i * cols + offset..i * cols + offset + out.len()];
        for (o, &mv) in out.iter_mut().zip(row) {
            *o += vi * mv;
        }
    }
}

pub(crate) fn gru_forward_traced(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b: &Tensor,
    return_sequences: bool,
) -> Result<(Tensor, GruTrace), NnError> {
    let (steps, f, units) = gru_check(x, w, u, b)?;
    let g3 = 3 * units;
    let mut h = vec![0.0; units];
    let mut trace = GruTrace {
        h_prev: Vec::with_capacity(steps),
        z: Vec::with_capacity(steps),
        r: Vec::with_capacity(steps),
        candidate: Vec::with_capacity(steps),
    };
    let mut seq = Vec::with_capacity(if return_sequences { steps * units } else { 0 });
    for t in 0..steps {
        let xt = &x.data()[t * f..(t + 1) * f];
        let mut pre = b.data().to_vec();
        vec_mat_acc(xt, w.data(), g3, 0, &mut pre);
        let mut rec = vec![0.0; 2 * units];
        vec_mat_acc(&h, u.data(), g3, 0, &mut rec);
        let z: Vec<f64> = (0..units).map(|j| sigmoid(pre[j] + rec[j])).collect();
        let r: Vec<f64> = (0..units)
            .map(|j| sigmoid(pre[units + j] + rec[units + j]))
            .collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let mut cand = pre[2 * units..].to_vec();
        vec_mat_acc(&rh, u.data(), g3, 2 * units, &mut cand);
        cand.iter_mut().for_each(|v| *v = v.tanh());
        let next: Vec<f64> = (0..units)
            .map(|j| (1.0 - z[j]) * h[j] + z[j] * cand[j])
            .collect();
        trace.h_prev.push(std::mem::replace(&mut h, next));
        trace.z.push(z);
        trace.r.push(r);
        trace.candidate.push(cand);
        if return_sequences {
            seq.extend_from_slice(&h);
        }
    }
    let out = if return_sequences {
        Tensor::new(vec![steps, units], seq)?
    } else {
        Tensor::scalar_vec(h)
    };
    Ok((out, trace))
}

/// Gated recurrent unit over a `t × f` sequence starting from a zero state:
///
/// ```text
/// z  = σ(x W_z + h U_z + b_z)
/// r  = σ(x W_r + h U_r + b_r)
/// h~ = tanh(x W_h + (r ∘ h) U_h + b_h)
/// h' = (1 - z) ∘ h + z ∘ h~
/// ```
pub fn gru_forward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b: &Tensor,
    return_sequences: bool,
) -> Result<Tensor, NnError> {
    gru_forward_traced(x, w, u, b, return_sequences).map(|(out, _)| out)
}

/// Backpropagation through time. `grad_out` is `t × u` for sequence
/// outputs, `u` for last-state outputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    trace: &GruTrace,
    return_sequences: bool,
    grad_out: &Tensor,
    grad_w: &mut Tensor,
    grad_u: &mut Tensor,
    grad_b: &mut Tensor,
) -> Tensor {
    let (steps, f) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let g3 = 3 * units;
    let ud = u.data();
    let wd = w.data();
    let mut gx = vec![0.0; steps * f];
    let mut dh_next = vec![0.0; units];
    let mut da = vec![0.0; g3];
    let mut d_rh = vec![0.0; units];
    for t in (0..steps).rev() {
        let h_prev = &trace.h_prev[t];
        let (z, r, cand) = (&trace.z[t], &trace.r[t], &trace.candidate[t]);
        let mut dh: Vec<f64> = dh_next.clone();
        if return_sequences {
            for (d, &g) in dh
                .iter_mut()
                .zip(&grad_out.data()[t * units..(t + 1) * units])
            {
                *d += g;
            }
        } else if t == steps - 1 {
            for (d, &g) in dh.iter_mut().zip(grad_out.data()) {
                *d += g;
            }
        }

        let mut dh_prev = vec![0.0; units];
        for j in 0..units {
            let dz = dh[j] * (cand[j] - h_prev[j]);
            let dcand = dh[j] * z[j];
            dh_prev[j] = dh[j] * (1.0 - z[j]);
            da[j] = dz * z[j] * (1.0 - z[j]);
            da[2 * units + j] = dcand * (1.0 - cand[j] * cand[j]);
        }

        // Candidate path through r ∘ h.
        let da_h = &da[2 * units..];
        for i in 0..units {
            let rh_i = r[i] * h_prev[i];
            let row = &ud[i * g3 + 2 * units..i * g3 + g3];
            let grow = &mut grad_u.data_mut()[i * g3 + 2 * units..i * g3 + g3];
            let mut acc = 0.0;
            for ((gv, &uv), &dv) in grow.iter_mut().zip(row).zip(da_h) {
                *gv += rh_i * dv;
                acc += uv * dv;
            }
            d_rh[i] = acc;
        }
        for i in 0..units {
            let dr = d_rh[i] * h_prev[i];
            dh_prev[i] += d_rh[i] * r[i];
            da[units + i] = dr * r[i] * (1.0 - r[i]);
        }

        // Gate recurrences.
        for i in 0..units {
            let hp = h_prev[i];
            let row = &ud[i * g3..i * g3 + 2 * units];
            let grow = &mut grad_u.data_mut()[i * g3..i * g3 + 2 * units];
            let mut acc = 0.0;
            for ((gv, &uv), &dv) in grow.iter_mut().zip(row).zip(&da[..2 * units]) {
                *gv += hp * dv;
                acc += uv * dv;
            }
            dh_prev[i] += acc;
        }

        let xt = &x.data()[t * f..(t + 1) * f];
        let gxt = &mut gx[t * f..(t + 1) * f];
        for (k, &xv) in xt.iter().enumerate() {
            let row = &wd[k * g3..(k + 1) * g3];
            let grow = &mut grad_w.data_mut()[k * g3..(k + 1) * g3];
            let mut acc = 0.0;
            for ((gv, &wv), &dv) in grow.iter_mut().zip(row).zip(&da) {
                *gv += xv * dv;
                acc += wv * dv;
            }
            gxt[k] = acc;
        }
        for (gb, &dv) in grad_b.data_mut().iter_mut().zip(&da) {
            *gb += dv;
        }
        dh_next = dh_prev;
    }
    Tensor::new(vec![steps, f], gx).expect("GRU input gradient shape")
}

/// Mean binary cross-entropy with probability clamping.
pub fn bce_loss(p: &[f64], y: &[f64]) -> f64 {
    assert_eq!(p.len(), y.len(), "prediction and target lengths differ");
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / p.len() as f64
}

/// Derivative of one example's clamped BCE term with respect to `p`.
pub fn bce_grad(p: f64, y: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
        return 0.0;
    }
    -y / p + (1.0 - y) / (1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn conv_of_ones() {
        let x = Tensor::new(vec![3, 3, 1], vec![1.0; 9]).unwrap();
        let k = Tensor::new(vec![2, 2, 1, 1], vec![1.0; 4]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d_forward(&x, &k, &b, (1, 1)).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn conv_prolongation_first_layer_shape() {
        let x = Tensor::zeros(&[2, 44, 1]);
        let k = Tensor::zeros(&[1, 5, 1, 32]);
        let b = Tensor::zeros(&[32]);
        let y = conv2d_forward(&x, &k, &b, (1, 2)).unwrap();
        assert_eq!(y.shape(), &[2, 20, 32]);
        assert_eq!(k.len() + b.len(), 192);
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&[4, 9, 2], &mut rng);
        let k = random_tensor(&[2, 3, 2, 3], &mut rng);
        let b = random_tensor(&[3], &mut rng);
        let y = conv2d_forward(&x, &k, &b, (2, 2)).unwrap();
        assert_eq!(y.shape(), &[2, 4, 3]);
        let xi = |i: usize, j: usize, c: usize| x.data()[(i * 9 + j) * 2 + c];
        let ki =
            |a: usize, bb: usize, ci: usize, co: usize| k.data()[((a * 3 + bb) * 2 + ci) * 3 + co];
        for i in 0..2 {
            for j in 0..4 {
                for co in 0..3 {
                    let mut s = b.data()[co];
                    for a in 0..2 {
                        for bb in 0..3 {
                            for ci in 0..2 {
                                s += xi(2 * i + a, 2 * j + bb, ci) * ki(a, bb, ci, co);
                            }
                        }
                    }
                    let got = y.data()[(i * 4 + j) * 3 + co];
                    assert!((got - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::zeros(&[1, 4, 1]);
        let k = Tensor::zeros(&[2, 2, 1, 1]);
        assert!(matches!(
            conv2d_forward(&x, &k, &Tensor::zeros(&[1]), (1, 1)),
            Err(NnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn dense_zero_sigmoid_is_half() {
        let y = dense_forward(
            &Tensor::scalar_vec(vec![0.3; 32]),
            &Tensor::zeros(&[32, 1]),
            &Tensor::zeros(&[1]),
            Some(Activation::Sigmoid),
        )
        .unwrap();
        assert_eq!(y.data(), &[0.5]);
    }

    #[test]
    fn dense_matches_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&[7], &mut rng);
        let w = random_tensor(&[7, 4], &mut rng);
        let b = random_tensor(&[4], &mut rng);
        let y = dense_forward(&x, &w, &b, None).unwrap();
        for j in 0..4 {
            let mut s = b.data()[j];
            for i in 0..7 {
                s += x.data()[i] * w.data()[i * 4 + j];
            }
            assert!((y.data()[j] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_rejects_wrong_input() {
        assert!(dense_forward(
            &Tensor::zeros(&[3]),
            &Tensor::zeros(&[4, 1]),
            &Tensor::zeros(&[1]),
            None
        )
        .is_err());
    }

    #[test]
    fn gru_with_zero_parameters_stays_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&[6, 5], &mut rng);
        let y = gru_forward(
            &x,
            &Tensor::zeros(&[5, 12]),
            &Tensor::zeros(&[4, 12]),
            &Tensor::zeros(&[12]),
            true,
        )
        .unwrap();
        assert_eq!(y.shape(), &[6, 4]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gru_single_step_by_hand() {
        // One unit, one feature: from h = 0 only the candidate path matters.
        let x = Tensor::new(vec![1, 1], vec![0.7]).unwrap();
        let w = Tensor::new(vec![1, 3], vec![0.2, -0.4, 0.9]).unwrap();
        let u = Tensor::new(vec![1, 3], vec![0.5, 0.5, 0.5]).unwrap();
        let b = Tensor::new(vec![3], vec![0.1, 0.0, -0.3]).unwrap();
        let y = gru_forward(&x, &w, &u, &b, false).unwrap();
        let z = sigmoid(0.7 * 0.2 + 0.1);
        let cand = (0.7f64 * 0.9 - 0.3).tanh();
        assert!((y.data()[0] - z * cand).abs() < 1e-15);
    }

    #[test]
    fn gru_last_state_equals_last_sequence_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_tensor(&[5, 3], &mut rng);
        let w = random_tensor(&[3, 6], &mut rng);
        let u = random_tensor(&[2, 6], &mut rng);
        let b = random_tensor(&[6], &mut rng);
        let seq = gru_forward(&x, &w, &u, &b, true).unwrap();
        let last = gru_forward(&x, &w, &u, &b, false).unwrap();
        assert_eq!(&seq.data()[8..10], last.data());
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(&[0.5], &[1.0]) - 2f64.ln()).abs() < 1e-15);
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]) <= 1e-6);
        assert!(bce_loss(&[0.0], &[1.0]).is_finite());
    }

    #[test]
    fn bce_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..50).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y: Vec<f64> = (0..50).map(|_| f64::from(rng.gen_range(0..2))).collect();
        let mut total = 0.0;
        for i in 0..50 {
            total -= if y[i] == 1.0 {
                p[i].ln()
            } else {
                (1.0 - p[i]).ln()
            };
        }
        assert!((bce_loss(&p, &y) - total / 50.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
