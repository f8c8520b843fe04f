//! Same-padded 3x3 convolution, evaluated directly on zero-padded planes so
//! that every kernel tap is one contiguous multiply-add.
//!
//! A plane of `h x w` pixels is stored padded as `(h + 2) x (w + 2)`.
//! Outputs are produced in a "wide" `h x (w + 2)` layout whose last two
//! columns are scratch; wide index `q` reads padded index `q + ky (w + 2) + kx`
//! for tap `(ky, kx)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const TAPS: usize = 9;

/// Geometry of one convolution application.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
}

impl Geometry {
    fn pw(&self) -> usize {
        self.w + 2
    }

    fn padded_len(&self) -> usize {
        (self.h + 2) * self.pw()
    }

    /// Wide positions that map to real output pixels or row-end scratch,
    /// stopping before the final two scratch cells so every tap stays in
    /// bounds.
    fn wide_len(&self) -> usize {
        self.h * self.pw() - 2
    }

    fn tap_offset(&self, t: usize) -> usize {
        (t / 3) * self.pw() + t % 3
    }
}

/// Reusable per-sample buffers.
struct Scratch {
    padded: Vec<f64>,
    wide: Vec<f64>,
}

impl Scratch {
    fn new(g: Geometry) -> Self {
        Self {
            padded: vec![0.0; g.c_in * g.padded_len()],
            wide: vec![0.0; g.c_out * g.h * g.pw()],
        }
    }
}

fn pad_into(g: Geometry, input: &[f64], padded: &mut [f64]) {
    let (hw, pl, pw) = (g.h * g.w, g.padded_len(), g.pw());
    padded.fill(0.0);
    for (src, dst) in input.chunks_exact(hw).zip(padded.chunks_exact_mut(pl)) {
        for (y, row) in src.chunks_exact(g.w).enumerate() {
            dst[(y + 1) * pw + 1..][..g.w].copy_from_slice(row);
        }
    }
}

fn axpy(k: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += k * x);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ar, br) = (ac.remainder(), bc.remainder());
    for (a4, b4) in ac.zip(bc) {
        for j in 0..4 {
            acc[j] += a4[j] * b4[j];
        }
    }
    for (j, (x, y)) in ar.iter().zip(br).enumerate() {
        acc[j] += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

fn forward_into(g: Geometry, input: &[f64], weights: &[f64], bias: &[f64], s: &mut Scratch, out: &mut [f64]) {
    let (pl, pw, wl) = (g.padded_len(), g.pw(), g.wide_len());
    pad_into(g, input, &mut s.padded);
    for (co, wide) in s.wide.chunks_exact_mut(g.h * pw).enumerate() {
        wide.fill(bias[co]);
        for ci in 0..g.c_in {
            let plane = &s.padded[ci * pl..(ci + 1) * pl];
            let kernel = &weights[(co * g.c_in + ci) * TAPS..][..TAPS];
            for (t, &k) in kernel.iter().enumerate() {
                let off = g.tap_offset(t);
                axpy(k, &plane[off..off + wl], &mut wide[..wl]);
            }
        }
        let dst = &mut out[co * g.h * g.w..(co + 1) * g.h * g.w];
        for (y, row) in dst.chunks_exact_mut(g.w).enumerate() {
            row.copy_from_slice(&wide[y * pw..y * pw + g.w]);
        }
    }
}

/// Accumulates weight and bias gradients and, when requested, writes the
/// input gradient.
#[allow(clippy::too_many_arguments)]
fn backward_into(
    g: Geometry,
    upstream: &[f64],
    input: &[f64],
    weights: &[f64],
    weight_grad: &mut [f64],
    bias_grad: &mut [f64],
    s: &mut Scratch,
    input_grad: Option<&mut [f64]>,
) {
    let (hw, pl, pw, wl) = (g.h * g.w, g.padded_len(), g.pw(), g.wide_len());
    pad_into(g, input, &mut s.padded);
    // Upstream gradient in wide layout with zeroed scratch columns.
    for (up, wide) in upstream.chunks_exact(hw).zip(s.wide.chunks_exact_mut(g.h * pw)) {
        for (y, row) in up.chunks_exact(g.w).enumerate() {
            wide[y * pw..y * pw + g.w].copy_from_slice(row);
            wide[y * pw + g.w..(y + 1) * pw].fill(0.0);
        }
    }
    for (co, wide) in s.wide.chunks_exact(g.h * pw).enumerate() {
        bias_grad[co] += upstream[co * hw..(co + 1) * hw].iter().sum::<f64>();
        for ci in 0..g.c_in {
            let plane = &s.padded[ci * pl..(ci + 1) * pl];
            let grad = &mut weight_grad[(co * g.c_in + ci) * TAPS..][..TAPS];
            for (t, gk) in grad.iter_mut().enumerate() {
                let off = g.tap_offset(t);
                *gk += dot(&wide[..wl], &plane[off..off + wl]);
            }
        }
    }
    if let Some(input_grad) = input_grad {
        // Reuse the padded buffer as the padded input gradient.
        s.padded.fill(0.0);
        for (co, wide) in s.wide.chunks_exact(g.h * pw).enumerate() {
            for ci in 0..g.c_in {
                let plane = &mut s.padded[ci * pl..(ci + 1) * pl];
                let kernel = &weights[(co * g.c_in + ci) * TAPS..][..TAPS];
                for (t, &k) in kernel.iter().enumerate() {
                    let off = g.tap_offset(t);
                    axpy(k, &wide[..wl], &mut plane[off..off + wl]);
                }
            }
        }
        for (plane, dst) in s.padded.chunks_exact(pl).zip(input_grad.chunks_exact_mut(hw)) {
            for (y, row) in dst.chunks_exact_mut(g.w).enumerate() {
                row.copy_from_slice(&plane[(y + 1) * pw + 1..][..g.w]);
            }
        }
    }
}

fn check_weights(op: &'static str, weights: &Tensor, bias: &Tensor, c_in: usize) -> Result<usize> {
    let ws = weights.shape();
    if ws.len() != 4 || ws[1] != c_in || ws[2] != 3 || ws[3] != 3 {
        let c_out = ws.first().copied().unwrap_or(0);
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![c_out, c_in, 3, 3],
            actual: ws.to_vec(),
        });
    }
    bias.expect_shape(op, &[ws[0]])?;
    Ok(ws[0])
}

fn image_dims(op: &'static str, input: &Tensor) -> Result<(usize, usize, usize)> {
    input.expect_rank(op, 3)?;
    let s = input.shape();
    if s[1] == 0 || s[2] == 0 {
        return Err(Error::ShapeMismatch {
            op,
            expected: vec![s[0], 1, 1],
            actual: s.to_vec(),
        });
    }
    Ok((s[0], s[1], s[2]))
}

/// Single-image forward pass: `[c_in, h, w]` to `[c_out, h, w]`.
pub fn conv3x3_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c_in, h, w) = image_dims("conv3x3_forward", input)?;
    let c_out = check_weights("conv3x3_forward", weights, bias, c_in)?;
    let g = Geometry { c_in, c_out, h, w };
    let mut out = Tensor::zeros(&[c_out, h, w]);
    forward_into(
        g,
        input.data(),
        weights.data(),
        bias.data(),
        &mut Scratch::new(g),
        out.data_mut(),
    );
    Ok(out)
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Single-image backward pass for [`conv3x3_forward`].
pub fn conv3x3_backward(upstream: &Tensor, input: &Tensor, weights: &Tensor) -> Result<ConvGrads> {
    let (c_in, h, w) = image_dims("conv3x3_backward", input)?;
    let c_out = weights.shape().first().copied().unwrap_or(0);
    let bias_grad_shape = [c_out];
    check_weights("conv3x3_backward", weights, &Tensor::zeros(&bias_grad_shape), c_in)?;
    upstream.expect_shape("conv3x3_backward", &[c_out, h, w])?;
    let g = Geometry { c_in, c_out, h, w };
    let mut grads = ConvGrads {
        input: Tensor::zeros(&[c_in, h, w]),
        weight: Tensor::zeros(weights.shape()),
        bias: Tensor::zeros(&bias_grad_shape),
    };
    backward_into(
        g,
        upstream.data(),
        input.data(),
        weights.data(),
        grads.weight.data_mut(),
        grads.bias.data_mut(),
        &mut Scratch::new(g),
        Some(grads.input.data_mut()),
    );
    Ok(grads)
}

/// Trainable 3x3 convolution layer operating on `[n, c, h, w]` batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub weight: Tensor,
    pub bias: Tensor,
    pub weight_grad: Tensor,
    pub bias_grad: Tensor,
}

impl Conv3x3 {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let c_in = weight.shape().get(1).copied().unwrap_or(0);
        check_weights("Conv3x3::new", &weight, &bias, c_in)?;
        Ok(Self {
            weight_grad: Tensor::zeros(weight.shape()),
            bias_grad: Tensor::zeros(bias.shape()),
            weight,
            bias,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    fn batch_geometry(&self, op: &'static str, input: &Tensor) -> Result<(usize, Geometry)> {
        input.expect_rank(op, 4)?;
        let s = input.shape();
        if s[1] != self.in_channels() || s[2] == 0 || s[3] == 0 {
            return Err(Error::ShapeMismatch {
                op,
                expected: vec![s[0], self.in_channels(), s[2].max(1), s[3].max(1)],
                actual: s.to_vec(),
            });
        }
        Ok((
            s[0],
            Geometry {
                c_in: s[1],
                c_out: self.out_channels(),
                h: s[2],
                w: s[3],
            },
        ))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n, g) = self.batch_geometry("conv3x3 forward", input)?;
        let in_len = g.c_in * g.h * g.w;
        let out_len = g.c_out * g.h * g.w;
        let mut out = vec![0.0; n * out_len];
        let mut scratch = Scratch::new(g);
        for (x, y) in input.data().chunks_exact(in_len).zip(out.chunks_exact_mut(out_len)) {
            forward_into(g, x, self.weight.data(), self.bias.data(), &mut scratch, y);
        }
        Tensor::new(vec![n, g.c_out, g.h, g.w], out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, upstream: &Tensor, input: &Tensor) -> Result<Tensor> {
        let mut input_grad = Tensor::zeros(input.shape());
        self.backward_into(upstream, input, Some(input_grad.data_mut()))?;
        Ok(input_grad)
    }

    /// Accumulates parameter gradients only.
    pub fn backward_params(&mut self, upstream: &Tensor, input: &Tensor) -> Result<()> {
        self.backward_into(upstream, input, None)
    }

    fn backward_into(&mut self, upstream: &Tensor, input: &Tensor, mut input_grad: Option<&mut [f64]>) -> Result<()> {
        let (n, g) = self.batch_geometry("conv3x3 backward", input)?;
        upstream.expect_shape("conv3x3 backward", &[n, g.c_out, g.h, g.w])?;
        let in_len = g.c_in * g.h * g.w;
        let out_len = g.c_out * g.h * g.w;
        let mut scratch = Scratch::new(g);
        for (i, (dy, x)) in upstream
            .data()
            .chunks_exact(out_len)
            .zip(input.data().chunks_exact(in_len))
            .enumerate()
        {
            backward_into(
                g,
                dy,
                x,
                self.weight.data(),
                self.weight_grad.data_mut(),
                self.bias_grad.data_mut(),
                &mut scratch,
                input_grad.as_deref_mut().map(|d| &mut d[i * in_len..(i + 1) * in_len]),
            );
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
