use alloc::vec::Vec;

use crate::autoencoder::IMAGE_LEN;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Grayscale images with pixel values in `[0, 1]` and digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
    labels: Vec<u8>,
}

impl ImageDataset {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if pixels.len() != labels.len() * rows * cols {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * rows * cols,
                actual: pixels.len(),
            });
        }
        if let Some(&value) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::PixelOutOfRange { value });
        }
        if let Some(&d) = labels.iter().find(|&&d| d > 9) {
            return Err(Error::InvalidDigit(d));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    /// Builds a dataset from raw 8-bit pixels, scaling by 1/255.
    pub fn from_bytes(rows: usize, cols: usize, bytes: &[u8], labels: Vec<u8>) -> Result<Self> {
        Self::new(rows, cols, bytes.iter().map(|&b| b as f64 / 255.0).collect(), labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    /// New dataset holding the given sample indices in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Self::new(self.rows, self.cols, pixels, labels)
    }

    /// `[n, 1, rows, cols]` tensor of the samples at `indices`.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * self.image_len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        Tensor::new(alloc::vec![indices.len(), 1, self.rows, self.cols], data).expect("consistent batch shape")
    }

    /// Errors unless images are 28x28.
    pub fn expect_mnist_geometry(&self) -> Result<()> {
        if self.image_len() != IMAGE_LEN || self.rows != 28 {
            return Err(Error::ShapeMismatch {
                op: "dataset geometry",
                expected: alloc::vec![28, 28],
                actual: alloc::vec![self.rows, self.cols],
            });
        }
        Ok(())
    }
}

/// Order-preserving subset of the samples labelled `digit`.
pub fn filter_class(dataset: &ImageDataset, digit: u8) -> Result<ImageDataset> {
    if digit > 9 {
        return Err(Error::InvalidDigit(digit));
    }
    let idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == digit).collect();
    if idx.is_empty() {
        return Err(Error::EmptyClass(digit));
    }
    dataset.select(&idx)
}
