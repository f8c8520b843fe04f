//! Gaussian fit of latent embeddings and Mahalanobis distance.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower};

/// Largest diagonal jitter tried before giving up on factorization.
pub const MAX_JITTER: f64 = 1e-3;

/// Mean and covariance of the encoded training set, with the Cholesky
/// factor of `sigma + jitter * I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    pub dim: usize,
    pub mu: Vec<f64>,
    /// Row-major `dim x dim`, unbiased (divisor `n - 1`).
    pub sigma: Vec<f64>,
    /// Lower-triangular row-major factor.
    pub cholesky: Vec<f64>,
    pub jitter: f64,
}

/// Jitter schedule: 0, then 1e-12, 1e-11, ... up to [`MAX_JITTER`].
fn jitter_schedule() -> impl Iterator<Item = f64> {
    core::iter::once(0.0).chain((3..=12).rev().map(|e| libm::pow(10.0, -(e as f64))))
}

impl GaussianStats {
    /// Fits the Gaussian to `n` row-major embeddings of length `dim`.
    pub fn fit(embeddings: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
        }
        if !embeddings.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: embeddings.len() % dim,
            });
        }
        let n = embeddings.len() / dim;
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let mut mu = vec![0.0; dim];
        for row in embeddings.chunks_exact(dim) {
            mu.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mu.iter_mut().for_each(|m| *m /= n as f64);

        let mut sigma = vec![0.0; dim * dim];
        let mut centered = vec![0.0; dim];
        for row in embeddings.chunks_exact(dim) {
            centered
                .iter_mut()
                .zip(row.iter().zip(&mu))
                .for_each(|(c, (v, m))| *c = v - m);
            for i in 0..dim {
                let ci = centered[i];
                for j in 0..=i {
                    sigma[i * dim + j] += ci * centered[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..dim {
            for j in 0..=i {
                let v = sigma[i * dim + j] / denom;
                sigma[i * dim + j] = v;
                sigma[j * dim + i] = v;
            }
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite embeddings"));
        }
        Self::from_covariance(mu, sigma)
    }

    /// Factorizes a given mean/covariance pair, escalating the jitter until
    /// the factorization succeeds.
    pub fn from_covariance(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let dim = mu.len();
        if sigma.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: sigma.len(),
            });
        }
        for jitter in jitter_schedule() {
            let mut a = sigma.clone();
            (0..dim).for_each(|i| a[i * dim + i] += jitter);
            if let Some(l) = cholesky(&a, dim) {
                return Ok(Self {
                    dim,
                    mu,
                    sigma,
                    cholesky: l,
                    jitter,
                });
            }
        }
        Err(Error::SingularCovariance { max_jitter: MAX_JITTER })
    }

    /// `sqrt((x - mu)ᵀ Σ⁻¹ (x - mu))` via a triangular solve.
    pub fn mahalanobis(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let diff: Vec<f64> = x.iter().zip(&self.mu).map(|(a, m)| a - m).collect();
        let y = solve_lower(&self.cholesky, self.dim, &diff);
        Ok(libm::sqrt(y.iter().map(|v| v * v).sum()))
    }

    /// Distances of every row of a row-major `[n, dim]` matrix.
    pub fn mahalanobis_rows(&self, rows: &[f64]) -> Result<Vec<f64>> {
        if !rows.len().is_multiple_of(self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: rows.len() % self.dim,
            });
        }
        rows.chunks_exact(self.dim).map(|r| self.mahalanobis(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_corners() {
        let pts = [0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0];
        let s = GaussianStats::fit(&pts, 2).unwrap();
        assert_eq!(s.mu, vec![1.0, 1.0]);
        let third = 4.0 / 3.0;
        for (a, e) in s.sigma.iter().zip([third, 0.0, 0.0, third]) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(s.jitter, 0.0);
    }

    #[test]
    fn duplicate_point_needs_jitter() {
        let s = GaussianStats::fit(&[0.5, -1.0, 0.5, -1.0], 2).unwrap();
        assert!(s.sigma.iter().all(|&v| v == 0.0));
        assert!(s.jitter > 0.0);
        assert_eq!(s.mahalanobis(&[0.5, -1.0]).unwrap(), 0.0);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            GaussianStats::fit(&[1.0, 2.0], 2).unwrap_err(),
            Error::TooFewSamples { needed: 2, got: 1 }
        );
    }

    #[test]
    fn permutation_invariant() {
        let pts = [0.1, 0.7, -1.2, 3.3, 2.0, 0.4, 0.9, -0.5, 1.1, 1.1];
        let mut shuffled = [0.0; 10];
        for (dst, src) in [3, 0, 4, 1, 2].iter().enumerate() {
            shuffled[dst * 2..dst * 2 + 2].copy_from_slice(&pts[src * 2..src * 2 + 2]);
        }
        let a = GaussianStats::fit(&pts, 2).unwrap();
        let b = GaussianStats::fit(&shuffled, 2).unwrap();
        for (x, y) in a.mu.iter().chain(&a.sigma).zip(b.mu.iter().chain(&b.sigma)) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_distances() {
        let ident = GaussianStats::from_covariance(vec![1.0, 2.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(ident.mahalanobis(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ident.mahalanobis(&[2.0, 2.0]).unwrap(), 1.0);
        let diag = GaussianStats::from_covariance(vec![0.0, 0.0], vec![4.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(diag.mahalanobis(&[2.0, 0.0]).unwrap(), 1.0);
        assert_eq!(
            diag.mahalanobis(&[1.0]).unwrap_err(),
            Error::DimensionMismatch { expected: 2, actual: 1 }
        );
    }

    #[test]
    fn hopeless_covariance_errors() {
        let err = GaussianStats::from_covariance(vec![0.0, 0.0], vec![-1.0, 0.0, 0.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::SingularCovariance { max_jitter: MAX_JITTER });
    }

    #[test]
    fn jitter_schedule_is_decadal() {
        let j: Vec<f64> = jitter_schedule().collect();
        assert_eq!(j.len(), 11);
        assert_eq!(j[0], 0.0);
        assert!((j[1] - 1e-12).abs() < 1e-27);
        assert!((j[10] - 1e-3).abs() < 1e-18);
    }
}
