//! Brute-force reference implementations and the synthetic manifold check,
//! shared by the integration tests and the acceptance binary.

#![allow(dead_code)]

pub mod fd;

use latent_guard_core::manifold::{make_manifold_set, ManifoldSpec, ProjectionModel, Role};
use latent_guard_core::metrics::fpr_at_tpr;
use latent_guard_core::novelty::{calibrate, features, LatentModel};
use latent_guard_core::{GaussianStats, Label, ScoredSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// P(ood score > inlier score) + P(tie) / 2 over all pairs.
pub fn auroc_pairs(inl: &[f64], ood: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &o in ood {
        for &i in inl {
            if o > i {
                wins += 1.0;
            } else if o == i {
                wins += 0.5;
            }
        }
    }
    wins / (inl.len() * ood.len()) as f64
}

/// Step-sum AUPR over every distinct threshold, each evaluated from scratch.
/// Positives are ranked by high score for OOD and by low score for inliers.
pub fn aupr_enumerate(inl: &[f64], ood: &[f64], positive: Label) -> f64 {
    let (pos, neg): (Vec<f64>, Vec<f64>) = match positive {
        Label::Ood => (ood.to_vec(), inl.to_vec()),
        Label::Inlier => (inl.iter().map(|v| -v).collect(), ood.iter().map(|v| -v).collect()),
    };
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut area, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let tp = pos.iter().filter(|&&v| v >= t).count();
        let fp = neg.iter().filter(|&&v| v >= t).count();
        let recall = tp as f64 / pos.len() as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// FPR at the smallest candidate threshold whose inlier acceptance rate
/// (`score <= τ`) reaches 95%, tried over every observed score.
pub fn fpr95_enumerate(inl: &[f64], ood: &[f64]) -> f64 {
    let mut candidates: Vec<f64> = inl.iter().chain(ood).copied().collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for tau in candidates {
        let accepted = inl.iter().filter(|&&v| v <= tau).count();
        if 20 * accepted >= 19 * inl.len() {
            return ood.iter().filter(|&&v| v <= tau).count() as f64 / ood.len() as f64;
        }
    }
    unreachable!("the largest score accepts every inlier")
}

/// Random labelled score set of at most `max_len` points with both classes,
/// drawn either from a coarse grid (many ties) or continuously.
pub fn random_groups(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..=max_len);
    let n_ood = rng.random_range(1..n);
    let shift: f64 = rng.random_range(-1.0..2.0);
    let coarse = rng.random_bool(0.5);
    let mut draw = |offset: f64| -> f64 {
        if coarse {
            (rng.random_range(0..8) as f64 + offset).round()
        } else {
            rng.random_range(0.0..1.0) + offset
        }
    };
    let inl: Vec<f64> = (0..n - n_ood).map(|_| draw(0.0)).collect();
    let ood: Vec<f64> = (0..n_ood).map(|_| draw(shift)).collect();
    (inl, ood)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}

/// Scores of the far on-manifold point against held-out inliers.
#[derive(Debug, Clone)]
pub struct FarPointCheck {
    pub far_re: f64,
    pub inlier_re_median: f64,
    pub far_h: f64,
    pub inlier_h_p99: f64,
    pub re_fpr: f64,
    pub h_fpr: f64,
}

impl FarPointCheck {
    pub fn holds(&self) -> bool {
        self.far_re < self.inlier_re_median && self.far_h > self.inlier_h_p99 && self.re_fpr == 1.0 && self.h_fpr == 0.0
    }
}

/// Fits the Gaussian on training inliers, calibrates on a second draw of
/// inliers, and scores held-out inliers plus the first far on-manifold point.
pub fn far_point_check(spec: ManifoldSpec, n: usize, seed: u64) -> FarPointCheck {
    let set = make_manifold_set(spec, n, seed).unwrap();
    let val = make_manifold_set(spec, n, seed + 1).unwrap();
    let model = ProjectionModel::new(&spec);
    let (z, _) = model.embed_batch(&set.rows(Role::InlierTrain)).unwrap();
    let stats = GaussianStats::fit(&z, model.latent_dim()).unwrap();
    let cal = calibrate(&model, &stats, &val.rows(Role::InlierTrain)).unwrap();

    let inl = features(&model, &stats, &set.rows(Role::InlierTest)).unwrap();
    let far_rows = set.rows(Role::OodOnManifold);
    let far = features(&model, &stats, &far_rows[..spec.ambient_dim()]).unwrap();
    let inl_h: Vec<f64> = inl
        .distances
        .iter()
        .zip(&inl.errors)
        .map(|(&d, &e)| cal.hybrid(d, e))
        .collect();
    let far_h = cal.hybrid(far.distances[0], far.errors[0]);

    let re_set = ScoredSet::from_groups(&inl.errors, &far.errors).unwrap();
    let h_set = ScoredSet::from_groups(&inl_h, &[far_h]).unwrap();
    FarPointCheck {
        far_re: far.errors[0],
        inlier_re_median: median(&inl.errors),
        far_h,
        inlier_h_p99: percentile(&inl_h, 99.0),
        re_fpr: fpr_at_tpr(&re_set, 0.95).unwrap(),
        h_fpr: fpr_at_tpr(&h_set, 0.95).unwrap(),
    }
}

/// Rows of an anisotropic, shifted Gaussian sample.
pub fn gaussian_rows(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim)
        .map(|i| {
            let z: f64 = StandardNormal.sample(r);
            z * (1.0 + (i % dim) as f64) + (i % dim) as f64
        })
        .collect()
}

/// Well-conditioned random affine map `x -> A x + b`: identity-like plus noise.
pub fn random_affine(r: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let a = (0..dim * dim)
        .map(|i| if i / dim == i % dim { 1.5 } else { 0.0 } + r.random_range(-0.4..0.4))
        .collect();
    let b = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
    (a, b)
}

pub fn apply_affine(a: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = b.len();
    (0..dim)
        .map(|i| b[i] + (0..dim).map(|j| a[i * dim + j] * x[j]).sum::<f64>())
        .collect()
}

/// Worst relative change of the distance under random affine maps of both
/// the fitting set and the query, over several dimensions.
pub fn affine_equivariance_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for dim in [1, 2, 5, 8] {
        let z = gaussian_rows(&mut r, 400, dim);
        let (a, b) = random_affine(&mut r, dim);
        let tz: Vec<f64> = z.chunks(dim).flat_map(|x| apply_affine(&a, &b, x)).collect();
        let s = GaussianStats::fit(&z, dim).unwrap();
        let t = GaussianStats::fit(&tz, dim).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..dim).map(|_| r.random_range(-6.0..6.0)).collect();
            let d = s.mahalanobis(&x).unwrap();
            let dt = t.mahalanobis(&apply_affine(&a, &b, &x)).unwrap();
            worst = worst.max((d - dt).abs() / d.max(1.0));
        }
    }
    worst
}

/// Whether identity-covariance distances equal Euclidean distances exactly.
pub fn identity_is_euclidean(seed: u64) -> bool {
    let mut r = rng(seed);
    [1, 3, 16].into_iter().all(|dim| {
        let mu: Vec<f64> = (0..dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let eye: Vec<f64> = (0..dim * dim)
            .map(|i| if i / dim == i % dim { 1.0 } else { 0.0 })
            .collect();
        let s = GaussianStats::from_covariance(mu.clone(), eye).unwrap();
        (0..20).all(|_| {
            let x: Vec<f64> = (0..dim).map(|_| r.random_range(-5.0..5.0)).collect();
            let euclid = x.iter().zip(&mu).map(|(a, m)| (a - m) * (a - m)).sum::<f64>().sqrt();
            s.mahalanobis(&x).unwrap() == euclid
        })
    })
}

/// Distance of the fitted mean from itself.
pub fn distance_at_mean(seed: u64) -> f64 {
    let mut r = rng(seed);
    let z = gaussian_rows(&mut r, 100, 4);
    let s = GaussianStats::fit(&z, 4).unwrap();
    s.mahalanobis(&s.mu.clone()).unwrap()
}
