use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output of a 2x2 max pool: the pooled tensor plus, for every output
/// element, the flat index of the input element that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// Disjoint 2x2 max pooling over the trailing two dims of a tensor of rank
/// at least 2 (`[c, h, w]` or `[n, c, h, w]`).
pub fn maxpool2x2_forward(input: &Tensor) -> Result<Pooled> {
    let shape = input.shape();
    if shape.len() < 2 {
        return Err(Error::ShapeMismatch {
            op: "maxpool2x2",
            expected: vec![1, 2, 2],
            actual: shape.to_vec(),
        });
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddPoolDims { height: h, width: w });
    }
    let planes: usize = shape[..shape.len() - 2].iter().product();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    let data = input.data();
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let top = base + 2 * y * w + 2 * x;
                let mut best = top;
                for idx in [top + 1, top + w, top + w + 1] {
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let r = out_shape.len();
    out_shape[r - 2] = oh;
    out_shape[r - 1] = ow;
    Ok(Pooled {
        output: Tensor::new(out_shape, out)?,
        argmax,
    })
}

/// Routes each upstream gradient to the input element that won its window.
pub fn maxpool2x2_backward(upstream: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::ShapeMismatch {
            op: "maxpool2x2 backward",
            expected: vec![argmax.len()],
            actual: upstream.shape().to_vec(),
        });
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &v) in argmax.iter().zip(upstream.data()) {
        g[idx] += v;
    }
    Ok(grad)
}
