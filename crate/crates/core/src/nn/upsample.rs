use alloc::vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Nearest-neighbour 2x upsampling of the trailing two dims: every element
/// becomes a 2x2 block.
pub fn upsample2x2_nearest(input: &Tensor) -> Result<Tensor> {
    let shape = input.shape();
    if shape.len() < 2 {
        return Err(Error::ShapeMismatch {
            op: "upsample2x2",
            expected: vec![1, 1, 1],
            actual: shape.to_vec(),
        });
    }
    let r = shape.len();
    let (h, w) = (shape[r - 2], shape[r - 1]);
    let mut out_shape = shape.to_vec();
    out_shape[r - 2] = 2 * h;
    out_shape[r - 1] = 2 * w;
    let ow = 2 * w;
    let plane_out = 4 * h * w;
    let src = input.data();
    Ok(Tensor::from_fn(&out_shape, |i| {
        let (p, rest) = (i / plane_out, i % plane_out);
        let (y, x) = (rest / ow, rest % ow);
        src[p * h * w + (y / 2) * w + x / 2]
    }))
}

/// Adjoint of [`upsample2x2_nearest`]: sums each 2x2 block of the upstream
/// gradient.
pub fn upsample2x2_backward(upstream: &Tensor) -> Result<Tensor> {
    let shape = upstream.shape();
    let r = shape.len();
    if r < 2 || !shape[r - 2].is_multiple_of(2) || !shape[r - 1].is_multiple_of(2) {
        return Err(Error::ShapeMismatch {
            op: "upsample2x2 backward",
            expected: vec![2, 2],
            actual: shape.to_vec(),
        });
    }
    let (oh, ow) = (shape[r - 2], shape[r - 1]);
    let (h, w) = (oh / 2, ow / 2);
    let mut in_shape = shape.to_vec();
    in_shape[r - 2] = h;
    in_shape[r - 1] = w;
    let g = upstream.data();
    Ok(Tensor::from_fn(&in_shape, |i| {
        let (p, rest) = (i / (h * w), i % (h * w));
        let (y, x) = (rest / w, rest % w);
        let top = p * oh * ow + 2 * y * ow + 2 * x;
        g[top] + g[top + 1] + g[top + ow] + g[top + ow + 1]
    }))
}
