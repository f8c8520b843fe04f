use rand::Rng;

use crate::tensor::Tensor;

/// Glorot-uniform sample in `[-limit, limit]`, `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    Tensor::from_fn(shape, |_| rng.random_range(-limit..=limit))
}
