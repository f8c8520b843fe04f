//! Binary cross-entropy and the L1 activity penalty.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Predictions are clamped to `[BCE_CLIP, 1 - BCE_CLIP]` before the log.
pub const BCE_CLIP: f64 = 1e-7;

fn clamp(p: f64) -> f64 {
    p.clamp(BCE_CLIP, 1.0 - BCE_CLIP)
}

fn check(prediction: &Tensor, target: &Tensor) -> Result<()> {
    target.expect_shape("bce_loss", prediction.shape())?;
    if let Some(&value) = prediction.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::PredictionOutOfRange { value });
    }
    if let Some(&value) = target.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::TargetOutOfRange { value });
    }
    Ok(())
}

fn elementwise(p: f64, t: f64) -> f64 {
    let p = clamp(p);
    -(t * libm::log(p) + (1.0 - t) * libm::log(1.0 - p))
}

fn mean_bce(p: &[f64], t: &[f64]) -> f64 {
    p.iter().zip(t).map(|(&p, &t)| elementwise(p, t)).sum::<f64>() / p.len() as f64
}

/// Mean binary cross-entropy over all elements.
pub fn bce_loss(prediction: &Tensor, target: &Tensor) -> Result<f64> {
    check(prediction, target)?;
    Ok(mean_bce(prediction.data(), target.data()))
}

/// Mean binary cross-entropy of each consecutive `sample_len` chunk.
pub fn bce_per_sample(prediction: &Tensor, target: &Tensor, sample_len: usize) -> Result<Vec<f64>> {
    check(prediction, target)?;
    if sample_len == 0 || !prediction.len().is_multiple_of(sample_len) {
        return Err(Error::DimensionMismatch {
            expected: sample_len,
            actual: prediction.len(),
        });
    }
    Ok(prediction
        .data()
        .chunks_exact(sample_len)
        .zip(target.data().chunks_exact(sample_len))
        .map(|(p, t)| mean_bce(p, t))
        .collect())
}

/// Gradient of [`bce_loss`] with respect to the prediction, evaluated at the
/// clamped prediction so saturated outputs still receive a signal.
pub fn bce_grad(prediction: &Tensor, target: &Tensor) -> Result<Tensor> {
    bce_grad_over(prediction, target, prediction.len())
}

/// Gradient of the BCE sum divided by `count` instead of by the number of
/// elements, for accumulating one large mean over several slices.
pub fn bce_grad_over(prediction: &Tensor, target: &Tensor, count: usize) -> Result<Tensor> {
    check(prediction, target)?;
    let n = count as f64;
    let mut grad = prediction.clone();
    grad.data_mut().iter_mut().zip(target.data()).for_each(|(g, &t)| {
        let p = clamp(*g);
        *g = (p - t) / (p * (1.0 - p) * n);
    });
    Ok(grad)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `lambda * sum |a|` and its subgradient (`sign(0) = 0`).
pub fn l1_penalty(activations: &Tensor, lambda: f64) -> (f64, Tensor) {
    let penalty = lambda * activations.data().iter().map(|v| v.abs()).sum::<f64>();
    (penalty, activations.map(|v| lambda * sign(v)))
}
