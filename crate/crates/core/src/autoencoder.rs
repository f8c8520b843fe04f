//! The one-class convolutional autoencoder.
//!
//! Encoder: conv3x3(32)+relu, maxpool, conv3x3(2)+relu, maxpool, flatten,
//! dense(k). Decoder: dense(98), reshape to 2x7x7, conv3x3(2)+relu,
//! upsample, conv3x3(32)+relu, upsample, conv3x3(1)+sigmoid.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::init::glorot_uniform;
use crate::nn::{bce_grad_over, bce_per_sample, l1_penalty, Activation, Conv3x3, Dense, Layer, ParamSlot, Sequential};
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Flattened size of the 2x7x7 feature map entering the bottleneck.
pub const BRIDGE_LEN: usize = 98;
pub const DEFAULT_L1_LAMBDA: f64 = 1e-5;
/// Bottleneck sizes of the full experiment grid.
pub const BOTTLENECK_SWEEP: [usize; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 784];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub bottleneck_size: usize,
    pub l1_lambda: f64,
    pub seed: u64,
}

impl ArchitectureConfig {
    pub fn new(bottleneck_size: usize, seed: u64) -> Self {
        Self {
            bottleneck_size,
            l1_lambda: DEFAULT_L1_LAMBDA,
            seed,
        }
    }
}

/// Loss terms of one batch, each averaged per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub reconstruction: f64,
    pub l1: f64,
}

impl BatchLoss {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.l1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub config: ArchitectureConfig,
    pub encoder: Sequential,
    pub decoder: Sequential,
}

fn conv<R: rand::Rng>(rng: &mut R, c_in: usize, c_out: usize) -> Result<Layer> {
    let weight = glorot_uniform(rng, &[c_out, c_in, 3, 3], c_in * 9, c_out * 9);
    Ok(Layer::Conv3x3(Conv3x3::new(weight, Tensor::zeros(&[c_out]))?))
}

fn dense<R: rand::Rng>(rng: &mut R, n_in: usize, n_out: usize) -> Result<Layer> {
    let weight = glorot_uniform(rng, &[n_out, n_in], n_in, n_out);
    Ok(Layer::Dense(Dense::new(weight, Tensor::zeros(&[n_out]))?))
}

/// Number of trainable scalars for bottleneck size `k`, counted by hand.
pub fn analytic_param_count(k: usize) -> usize {
    let conv = |c_in: usize, c_out: usize| c_out * c_in * 9 + c_out;
    let dense = |n_in: usize, n_out: usize| n_out * n_in + n_out;
    conv(1, 32) + conv(32, 2) + dense(BRIDGE_LEN, k) + dense(k, BRIDGE_LEN) + conv(2, 2) + conv(2, 32) + conv(32, 1)
}

fn image_batch(op: &'static str, x: &Tensor) -> Result<usize> {
    let s = x.shape();
    let n = match s.len() {
        3 if s == [1, IMAGE_SIDE, IMAGE_SIDE] => 1,
        4 if s[1..] == [1, IMAGE_SIDE, IMAGE_SIDE] => s[0],
        _ => {
            return Err(Error::ShapeMismatch {
                op,
                expected: vec![1, IMAGE_SIDE, IMAGE_SIDE],
                actual: s.to_vec(),
            })
        }
    };
    if let Some(&value) = x.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::PixelOutOfRange { value });
    }
    Ok(n)
}

fn as_batch(x: &Tensor, n: usize) -> Result<Tensor> {
    x.clone().reshape(&[n, 1, IMAGE_SIDE, IMAGE_SIDE])
}

/// Images per forward/backward slice; small enough for every activation to
/// stay in cache.
const MICRO_BATCH: usize = 4;

fn micro_batches(xs: &Tensor) -> impl Iterator<Item = Result<Tensor>> + '_ {
    xs.data()
        .chunks(MICRO_BATCH * IMAGE_LEN)
        .map(|chunk| Tensor::new(vec![chunk.len() / IMAGE_LEN, 1, IMAGE_SIDE, IMAGE_SIDE], chunk.to_vec()))
}

impl AutoencoderModel {
    /// Fresh model with Glorot-uniform weights and zero biases drawn from a
    /// ChaCha8 stream seeded by `seed`.
    pub fn build(bottleneck_size: usize, seed: u64) -> Result<Self> {
        Self::from_config(ArchitectureConfig::new(bottleneck_size, seed))
    }

    pub fn from_config(config: ArchitectureConfig) -> Result<Self> {
        let k = config.bottleneck_size;
        if k < 1 {
            return Err(Error::InvalidBottleneck);
        }
        if !(config.l1_lambda >= 0.0) {
            return Err(Error::InvalidConfig("l1_lambda must be non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let encoder = Sequential::new(vec![
            conv(&mut rng, 1, 32)?,
            Layer::Activation(Activation::Relu),
            Layer::MaxPool2x2,
            conv(&mut rng, 32, 2)?,
            Layer::Activation(Activation::Relu),
            Layer::MaxPool2x2,
            Layer::Flatten,
            dense(&mut rng, BRIDGE_LEN, k)?,
        ]);
        let decoder = Sequential::new(vec![
            dense(&mut rng, k, BRIDGE_LEN)?,
            Layer::Reshape(vec![2, 7, 7]),
            conv(&mut rng, 2, 2)?,
            Layer::Activation(Activation::Relu),
            Layer::Upsample2x2,
            conv(&mut rng, 2, 32)?,
            Layer::Activation(Activation::Relu),
            Layer::Upsample2x2,
            conv(&mut rng, 32, 1)?,
            Layer::Activation(Activation::Sigmoid),
        ]);
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }

    pub fn bottleneck_size(&self) -> usize {
        self.config.bottleneck_size
    }

    /// Latent embedding of one `[1, 28, 28]` image.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        if image_batch("encode", x)? != 1 || x.shape().len() != 3 {
            return Err(Error::ShapeMismatch {
                op: "encode",
                expected: vec![1, IMAGE_SIDE, IMAGE_SIDE],
                actual: x.shape().to_vec(),
            });
        }
        let z = self.encoder.forward(&as_batch(x, 1)?)?;
        z.reshape(&[self.bottleneck_size()])
    }

    /// Embeddings `[n, k]` of a `[n, 1, 28, 28]` batch.
    pub fn encode_batch(&self, xs: &Tensor) -> Result<Tensor> {
        let n = image_batch("encode_batch", xs)?;
        self.encoder.forward(&as_batch(xs, n)?)
    }

    /// Decodes a single `[k]` latent vector to a `[1, 28, 28]` image.
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        z.expect_shape("decode", &[self.bottleneck_size()])?;
        let y = self
            .decoder
            .forward(&z.clone().reshape(&[1, self.bottleneck_size()])?)?;
        y.reshape(&[1, IMAGE_SIDE, IMAGE_SIDE])
    }

    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor> {
        self.decode(&self.encode(x)?)
    }

    /// Mean per-pixel BCE between `x` and its reconstruction. The L1
    /// activity penalty is not part of this score.
    pub fn reconstruction_error(&self, x: &Tensor) -> Result<f64> {
        let recon = self.reconstruct(x)?;
        crate::nn::bce_loss(&recon, x)
    }

    /// Embeddings `[n, k]` and per-sample reconstruction errors for a batch.
    pub fn features_batch(&self, xs: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        let n = image_batch("features_batch", xs)?;
        let k = self.bottleneck_size();
        let mut z_all = Vec::with_capacity(n * k);
        let mut errors = Vec::with_capacity(n);
        for micro in micro_batches(xs) {
            let micro = micro?;
            let z = self.encoder.forward(&micro)?;
            let recon = self.decoder.forward(&z)?;
            errors.extend(bce_per_sample(&recon, &micro, IMAGE_LEN)?);
            z_all.extend_from_slice(z.data());
        }
        Ok((Tensor::new(vec![n, k], z_all)?, errors))
    }

    /// Training objective on a batch without touching gradients.
    pub fn batch_loss(&self, xs: &Tensor) -> Result<BatchLoss> {
        let n = image_batch("batch_loss", xs)?;
        let (mut bce, mut l1) = (0.0, 0.0);
        for micro in micro_batches(xs) {
            let micro = micro?;
            let z = self.encoder.forward(&micro)?;
            let recon = self.decoder.forward(&z)?;
            bce += bce_per_sample(&recon, &micro, IMAGE_LEN)?.iter().sum::<f64>();
            l1 += l1_penalty(&z, self.config.l1_lambda).0;
        }
        Ok(BatchLoss {
            reconstruction: bce / n as f64,
            l1: l1 / n as f64,
        })
    }

    /// Forward and backward pass over a batch. Gradients of the batch-mean
    /// objective (BCE + L1 on the bottleneck activations) overwrite the
    /// layers' gradient buffers. The batch is processed in small slices
    /// whose gradients are summed.
    pub fn compute_gradients(&mut self, xs: &Tensor) -> Result<BatchLoss> {
        let n = image_batch("compute_gradients", xs)?;
        self.encoder.zero_grad();
        self.decoder.zero_grad();
        let (mut bce, mut l1) = (0.0, 0.0);
        for micro in micro_batches(xs) {
            let micro = micro?;
            let (z, enc_caches) = self.encoder.forward_train(micro.clone())?;
            let (recon, dec_caches) = self.decoder.forward_train(z.clone())?;
            bce += bce_per_sample(&recon, &micro, IMAGE_LEN)?.iter().sum::<f64>();
            l1 += l1_penalty(&z, self.config.l1_lambda).0;

            // The batch-mean BCE is the sum over all pixels divided by n * 784.
            let d_recon = bce_grad_over(&recon, &micro, n * IMAGE_LEN)?;
            let mut d_z = self.decoder.backward(d_recon, dec_caches)?;
            let (_, l1_grad) = l1_penalty(&z, self.config.l1_lambda / n as f64);
            d_z.data_mut().iter_mut().zip(l1_grad.data()).for_each(|(g, l)| *g += l);
            self.encoder.backward_params(d_z, enc_caches)?;
        }
        Ok(BatchLoss {
            reconstruction: bce / n as f64,
            l1: l1 / n as f64,
        })
    }

    /// All parameter tensors, encoder first, each layer weight then bias.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn grads(&self) -> Vec<&Tensor> {
        let mut g = self.encoder.grads();
        g.extend(self.decoder.grads());
        g
    }

    pub fn slots(&mut self) -> Vec<ParamSlot<'_>> {
        let mut s = self.encoder.slots();
        s.extend(self.decoder.slots());
        s
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Replaces every parameter tensor, checking shapes against the
    /// architecture.
    pub fn load_params(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != tensors.len() {
            return Err(Error::DimensionMismatch {
                expected: slots.len(),
                actual: tensors.len(),
            });
        }
        for (slot, t) in slots.iter().zip(&tensors) {
            t.expect_shape("load_params", slot.shape())?;
        }
        for (slot, t) in slots.iter_mut().zip(tensors) {
            **slot = t;
        }
        Ok(())
    }
}
