use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

pub fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

pub fn activation(input: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Relu => input.map(relu),
        Activation::Sigmoid => input.map(sigmoid),
    }
}

/// Gradient through an activation given its forward output.
pub fn activation_backward(upstream: &Tensor, output: &Tensor, kind: Activation) -> Tensor {
    let mut grad = upstream.clone();
    let pairs = grad.data_mut().iter_mut().zip(output.data());
    match kind {
        Activation::Relu => pairs.for_each(|(g, &y)| {
            if y <= 0.0 {
                *g = 0.0
            }
        }),
        Activation::Sigmoid => pairs.for_each(|(g, &y)| *g *= y * (1.0 - y)),
    }
    grad
}
