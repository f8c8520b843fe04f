//! Synthetic latent-manifold data with an exact projection "autoencoder".
//!
//! Training inliers occupy a bounded patch of a line/subspace or circle.
//! Two kinds of OOD points are placed: on the manifold but far from the
//! training patch (zero reconstruction error), and off the manifold at a
//! fixed orthogonal offset.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::novelty::LatentModel;

/// Half-width of the training box along each subspace axis.
pub const TRAIN_HALF_WIDTH: f64 = 1.0;
/// Distance of far on-manifold OOD points from the training centroid.
pub const FAR_DISTANCE: f64 = 100.0;
/// Half-angle of the training arc on the circle.
pub const TRAIN_ARC: f64 = PI / 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ManifoldShape {
    /// Span of the first `subspace_dim` coordinate axes in `ambient_dim`.
    Linear { ambient_dim: usize, subspace_dim: usize },
    /// Circle in the plane.
    Circular { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub shape: ManifoldShape,
    /// Isotropic Gaussian noise on inlier samples.
    pub noise_std: f64,
    /// Orthogonal distance of off-manifold OOD points.
    pub off_manifold_offset: f64,
}

impl ManifoldSpec {
    pub fn linear(ambient_dim: usize, subspace_dim: usize) -> Self {
        Self {
            shape: ManifoldShape::Linear {
                ambient_dim,
                subspace_dim,
            },
            noise_std: 0.02,
            off_manifold_offset: 5.0,
        }
    }

    pub fn circular(center: [f64; 2], radius: f64) -> Self {
        Self {
            shape: ManifoldShape::Circular { center, radius },
            noise_std: 0.02,
            off_manifold_offset: 5.0,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.shape {
            ManifoldShape::Linear { ambient_dim, .. } => ambient_dim,
            ManifoldShape::Circular { .. } => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        match self.shape {
            ManifoldShape::Linear {
                ambient_dim,
                subspace_dim,
            } => {
                if ambient_dim < 2 {
                    return Err(Error::InvalidManifold("ambient dimension must be at least 2"));
                }
                if subspace_dim == 0 || subspace_dim >= ambient_dim {
                    return Err(Error::InvalidManifold("subspace dimension must be in 1..ambient_dim"));
                }
            }
            ManifoldShape::Circular { radius, .. } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidManifold("radius must be positive"));
                }
            }
        }
        if !(self.noise_std >= 0.0) || !(self.off_manifold_offset > 0.0) {
            return Err(Error::InvalidManifold("noise must be >= 0 and offset > 0"));
        }
        Ok(())
    }

    /// Orthogonal distance of `p` from the manifold.
    pub fn residual(&self, p: &[f64]) -> f64 {
        match self.shape {
            ManifoldShape::Linear { subspace_dim, .. } => libm::sqrt(p[subspace_dim..].iter().map(|v| v * v).sum()),
            ManifoldShape::Circular { center, radius } => {
                (libm::hypot(p[0] - center[0], p[1] - center[1]) - radius).abs()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    InlierTrain,
    InlierTest,
    OodOnManifold,
    OodOffManifold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticManifoldSet {
    pub spec: ManifoldSpec,
    /// Row-major, one point per role entry.
    pub points: Vec<f64>,
    pub roles: Vec<Role>,
}

impl SyntheticManifoldSet {
    pub fn dim(&self) -> usize {
        self.spec.ambient_dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    /// Concatenated points with the given role.
    pub fn rows(&self, role: Role) -> Vec<f64> {
        (0..self.roles.len())
            .filter(|&i| self.roles[i] == role)
            .flat_map(|i| self.point(i).iter().copied())
            .collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }
}

/// Generates `n_train` training and `n_train` test inliers plus the two OOD
/// families for `spec`.
pub fn make_manifold_set(spec: ManifoldSpec, n_train: usize, seed: u64) -> Result<SyntheticManifoldSet> {
    spec.validate()?;
    if n_train < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: n_train,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|_| Error::InvalidManifold("bad noise"))?;
    let mut points = Vec::new();
    let mut roles = Vec::new();
    let d = spec.ambient_dim();

    for role in [Role::InlierTrain, Role::InlierTest] {
        for _ in 0..n_train {
            let mut p = match spec.shape {
                ManifoldShape::Linear { subspace_dim, .. } => {
                    let mut p = alloc::vec![0.0; d];
                    for v in &mut p[..subspace_dim] {
                        *v = rng.random_range(-TRAIN_HALF_WIDTH..=TRAIN_HALF_WIDTH);
                    }
                    p
                }
                ManifoldShape::Circular { center, radius } => {
                    let t: f64 = rng.random_range(-TRAIN_ARC..=TRAIN_ARC);
                    alloc::vec![center[0] + radius * libm::cos(t), center[1] + radius * libm::sin(t)]
                }
            };
            if spec.noise_std > 0.0 {
                p.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
            points.extend(p);
            roles.push(role);
        }
    }

    match spec.shape {
        ManifoldShape::Linear { subspace_dim, .. } => {
            for axis in 0..subspace_dim {
                for sign in [1.0, -1.0] {
                    let mut p = alloc::vec![0.0; d];
                    p[axis] = sign * FAR_DISTANCE;
                    points.extend(p);
                    roles.push(Role::OodOnManifold);
                }
            }
            for sign in [1.0, -1.0] {
                let mut p = alloc::vec![0.0; d];
                p[subspace_dim] = sign * spec.off_manifold_offset;
                points.extend(p);
                roles.push(Role::OodOffManifold);
            }
        }
        ManifoldShape::Circular { center, radius } => {
            points.extend([center[0] - radius, center[1]]);
            roles.push(Role::OodOnManifold);
            points.extend([center[0] + radius + spec.off_manifold_offset, center[1]]);
            roles.push(Role::OodOffManifold);
        }
    }

    Ok(SyntheticManifoldSet { spec, points, roles })
}

/// Exact projection onto the manifold, playing the role of a perfectly
/// trained autoencoder: the latent code is the manifold coordinate and the
/// reconstruction error is the mean squared orthogonal residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionModel {
    pub shape: ManifoldShape,
}

impl ProjectionModel {
    pub fn new(spec: &ManifoldSpec) -> Self {
        Self { shape: spec.shape }
    }
}

impl LatentModel for ProjectionModel {
    fn input_len(&self) -> usize {
        match self.shape {
            ManifoldShape::Linear { ambient_dim, .. } => ambient_dim,
            ManifoldShape::Circular { .. } => 2,
        }
    }

    fn latent_dim(&self) -> usize {
        match self.shape {
            ManifoldShape::Linear { subspace_dim, .. } => subspace_dim,
            ManifoldShape::Circular { .. } => 1,
        }
    }

    fn embed(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                actual: x.len(),
            });
        }
        Ok(match self.shape {
            ManifoldShape::Linear {
                subspace_dim,
                ambient_dim,
            } => {
                let err = x[subspace_dim..].iter().map(|v| v * v).sum::<f64>() / ambient_dim as f64;
                (x[..subspace_dim].to_vec(), err)
            }
            ManifoldShape::Circular { center, radius } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let angle = libm::atan2(dy, dx);
                let r = libm::hypot(dx, dy) - radius;
                (alloc::vec![angle], r * r / 2.0)
            }
        })
    }
}
