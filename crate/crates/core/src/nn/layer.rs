use alloc::vec;
use alloc::vec::Vec;

use super::activation::{activation, activation_backward, Activation};
use super::adadelta::ParamSlot;
use super::conv::Conv3x3;
use super::dense::Dense;
use super::pool::{maxpool2x2_backward, maxpool2x2_forward};
use super::upsample::{upsample2x2_backward, upsample2x2_nearest};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One stage of a feed-forward stack. Every variant consumes and produces
/// batched tensors whose leading dimension is the batch.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv3x3(Conv3x3),
    MaxPool2x2,
    Upsample2x2,
    Dense(Dense),
    Activation(Activation),
    /// `[n, ...]` to `[n, prod(...)]`
    Flatten,
    /// `[n, m]` to `[n, shape...]`
    Reshape(Vec<usize>),
}

/// What a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Tensor),
    Output(Tensor),
    Pool {
        argmax: Vec<usize>,
        input_shape: Vec<usize>,
    },
    Shape(Vec<usize>),
    None,
}

fn batch_of(t: &Tensor) -> Result<usize> {
    t.shape().first().copied().ok_or(Error::ShapeMismatch {
        op: "layer input",
        expected: vec![1],
        actual: Vec::new(),
    })
}

fn reshape_batch(x: Tensor, target: &[usize]) -> Result<Tensor> {
    let n = batch_of(&x)?;
    let mut shape = Vec::with_capacity(target.len() + 1);
    shape.push(n);
    shape.extend_from_slice(target);
    let actual = x.shape().to_vec();
    x.reshape(&shape).map_err(|_| Error::ShapeMismatch {
        op: "reshape",
        expected: shape,
        actual,
    })
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x.clone(), false)?.0)
    }

    /// Forward pass that optionally records what backward needs.
    pub fn forward_cached(&self, x: Tensor, keep: bool) -> Result<(Tensor, Cache)> {
        let keep_if = |c: Cache| if keep { c } else { Cache::None };
        Ok(match self {
            Layer::Conv3x3(conv) => {
                let y = conv.forward(&x)?;
                (y, keep_if(Cache::Input(x)))
            }
            Layer::Dense(dense) => {
                let y = dense.forward(&x)?;
                (y, keep_if(Cache::Input(x)))
            }
            Layer::MaxPool2x2 => {
                let pooled = maxpool2x2_forward(&x)?;
                let cache = keep_if(Cache::Pool {
                    argmax: pooled.argmax,
                    input_shape: x.shape().to_vec(),
                });
                (pooled.output, cache)
            }
            Layer::Upsample2x2 => (upsample2x2_nearest(&x)?, Cache::None),
            Layer::Activation(kind) => {
                let y = activation(&x, *kind);
                let cache = keep_if(Cache::Output(y.clone()));
                (y, cache)
            }
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                let flat: usize = shape.iter().skip(1).product();
                (reshape_batch(x, &[flat])?, keep_if(Cache::Shape(shape)))
            }
            Layer::Reshape(target) => {
                let shape = x.shape().to_vec();
                (reshape_batch(x, target)?, keep_if(Cache::Shape(shape)))
            }
        })
    }

    /// Backward pass; parameter gradients are accumulated into the layer.
    pub fn backward(&mut self, grad: Tensor, cache: Cache) -> Result<Tensor> {
        match (self, cache) {
            (Layer::Conv3x3(conv), Cache::Input(x)) => conv.backward(&grad, &x),
            (Layer::Dense(dense), Cache::Input(x)) => dense.backward(&grad, &x),
            (Layer::MaxPool2x2, Cache::Pool { argmax, input_shape }) => {
                maxpool2x2_backward(&grad, &argmax, &input_shape)
            }
            (Layer::Upsample2x2, _) => upsample2x2_backward(&grad),
            (Layer::Activation(kind), Cache::Output(y)) => Ok(activation_backward(&grad, &y, *kind)),
            (Layer::Flatten | Layer::Reshape(_), Cache::Shape(shape)) => grad.reshape(&shape),
            _ => Err(Error::InvalidConfig("backward called without a matching forward cache")),
        }
    }

    pub fn zero_grad(&mut self) {
        match self {
            Layer::Conv3x3(c) => {
                c.weight_grad.data_mut().fill(0.0);
                c.bias_grad.data_mut().fill(0.0);
            }
            Layer::Dense(d) => {
                d.weight_grad.data_mut().fill(0.0);
                d.bias_grad.data_mut().fill(0.0);
            }
            _ => {}
        }
    }

    /// Parameter tensors in a fixed order (weight, then bias).
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv3x3(c) => vec![&c.weight, &c.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv3x3(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => Vec::new(),
        }
    }

    pub fn grads(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv3x3(c) => vec![&c.weight_grad, &c.bias_grad],
            Layer::Dense(d) => vec![&d.weight_grad, &d.bias_grad],
            _ => Vec::new(),
        }
    }

    pub fn slots(&mut self) -> Vec<ParamSlot<'_>> {
        match self {
            Layer::Conv3x3(c) => vec![
                ParamSlot {
                    value: c.weight.data_mut(),
                    grad: c.weight_grad.data(),
                },
                ParamSlot {
                    value: c.bias.data_mut(),
                    grad: c.bias_grad.data(),
                },
            ],
            Layer::Dense(d) => vec![
                ParamSlot {
                    value: d.weight.data_mut(),
                    grad: d.weight_grad.data(),
                },
                ParamSlot {
                    value: d.bias.data_mut(),
                    grad: d.bias_grad.data(),
                },
            ],
            _ => Vec::new(),
        }
    }
}

/// Ordered stack of layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward_cached(cur, false)?.0;
        }
        Ok(cur)
    }

    pub fn forward_train(&self, x: Tensor) -> Result<(Tensor, Vec<Cache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x;
        for layer in &self.layers {
            let (y, cache) = layer.forward_cached(cur, true)?;
            caches.push(cache);
            cur = y;
        }
        Ok((cur, caches))
    }

    pub fn backward(&mut self, grad: Tensor, caches: Vec<Cache>) -> Result<Tensor> {
        let mut cur = grad;
        for (layer, cache) in self.layers.iter_mut().zip(caches).rev() {
            cur = layer.backward(cur, cache)?;
        }
        Ok(cur)
    }

    /// Backward pass that only accumulates parameter gradients, skipping
    /// the input gradient of a leading convolution.
    pub fn backward_params(&mut self, grad: Tensor, mut caches: Vec<Cache>) -> Result<()> {
        if caches.len() != self.layers.len() {
            return Err(Error::InvalidConfig("backward called without a matching forward cache"));
        }
        let first_cache = caches.remove(0);
        let (first, rest) = self.layers.split_at_mut(1);
        let mut cur = grad;
        for (layer, cache) in rest.iter_mut().zip(caches).rev() {
            cur = layer.backward(cur, cache)?;
        }
        match (&mut first[0], first_cache) {
            (Layer::Conv3x3(conv), Cache::Input(x)) => conv.backward_params(&cur, &x),
            (layer, cache) => layer.backward(cur, cache).map(drop),
        }
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grad);
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn grads(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::grads).collect()
    }

    pub fn slots(&mut self) -> Vec<ParamSlot<'_>> {
        self.layers.iter_mut().flat_map(Layer::slots).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}
