use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg::{gemm, MatRef};
use crate::tensor::Tensor;

fn check(op: &'static str, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize)> {
    weights.expect_rank(op, 2)?;
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    bias.expect_shape(op, &[m])?;
    Ok((m, n))
}

/// `W x + b` for a single vector.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = check("dense_forward", weights, bias)?;
    input.expect_shape("dense_forward", &[n])?;
    let mut out = bias.data().to_vec();
    gemm(
        MatRef::new(weights.data(), m, n),
        MatRef::new(input.data(), n, 1),
        1.0,
        &mut out,
    );
    Tensor::new(vec![m], out)
}

/// Fully connected layer on `[batch, in]` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[out, in]`
    pub weight: Tensor,
    pub bias: Tensor,
    pub weight_grad: Tensor,
    pub bias_grad: Tensor,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        check("Dense::new", &weight, &bias)?;
        Ok(Self {
            weight_grad: Tensor::zeros(weight.shape()),
            bias_grad: Tensor::zeros(bias.shape()),
            weight,
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn batch_len(&self, op: &'static str, input: &Tensor) -> Result<usize> {
        let s = input.shape();
        if s.len() != 2 || s[1] != self.in_dim() {
            return Err(Error::ShapeMismatch {
                op,
                expected: vec![s.first().copied().unwrap_or(1), self.in_dim()],
                actual: s.to_vec(),
            });
        }
        Ok(s[0])
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let n = self.batch_len("dense forward", input)?;
        let (m, k) = (self.out_dim(), self.in_dim());
        let mut out = vec![0.0; n * m];
        for row in out.chunks_exact_mut(m) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(
            MatRef::new(input.data(), n, k),
            MatRef::transpose_of(self.weight.data(), m, k),
            1.0,
            &mut out,
        );
        Tensor::new(vec![n, m], out)
    }

    pub fn backward(&mut self, upstream: &Tensor, input: &Tensor) -> Result<Tensor> {
        let n = self.batch_len("dense backward", input)?;
        let (m, k) = (self.out_dim(), self.in_dim());
        upstream.expect_shape("dense backward", &[n, m])?;
        gemm(
            MatRef::transpose_of(upstream.data(), n, m),
            MatRef::new(input.data(), n, k),
            1.0,
            self.weight_grad.data_mut(),
        );
        for row in upstream.data().chunks_exact(m) {
            self.bias_grad.data_mut().iter_mut().zip(row).for_each(|(g, v)| *g += v);
        }
        let mut dx = vec![0.0; n * k];
        gemm(
            MatRef::new(upstream.data(), n, m),
            MatRef::new(self.weight.data(), m, k),
            0.0,
            &mut dx,
        );
        Tensor::new(vec![n, k], dx)
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
