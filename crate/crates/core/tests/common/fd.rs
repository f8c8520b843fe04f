//! Central finite-difference checks of every layer's backward pass. Each
//! check returns the worst relative error over all entries and cases.

use latent_guard_core::nn::{
    activation, activation_backward, bce_grad, bce_loss, conv3x3_backward, conv3x3_forward, l1_penalty,
    maxpool2x2_backward, maxpool2x2_forward, upsample2x2_backward, upsample2x2_nearest, Activation, Dense,
};
use latent_guard_core::{AutoencoderModel, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-6;
pub const TOL: f64 = 1e-4;
pub const CASES: u64 = 20;

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values bounded away from zero so ReLU kinks are never straddled.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst relative error of `grad` against central differences of `f` at
/// every entry of `x`.
pub fn check_all(x: &Tensor, grad: &Tensor, f: impl Fn(&Tensor) -> f64) -> f64 {
    assert_eq!(x.shape(), grad.shape());
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= H;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * H);
        worst = worst.max(rel_error(grad.data()[i], numeric));
    }
    worst
}

pub fn conv() -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let (c_in, c_out) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let x = random(&mut rng, &[c_in, h, w]);
        let wt = random(&mut rng, &[c_out, c_in, 3, 3]);
        let b = random(&mut rng, &[c_out]);
        let up = random(&mut rng, &[c_out, h, w]);
        let g = conv3x3_backward(&up, &x, &wt).unwrap();
        worst = worst
            .max(check_all(&x, &g.input, |x| {
                dot(&up, &conv3x3_forward(x, &wt, &b).unwrap())
            }))
            .max(check_all(&wt, &g.weight, |wt| {
                dot(&up, &conv3x3_forward(&x, wt, &b).unwrap())
            }))
            .max(check_all(&b, &g.bias, |b| {
                dot(&up, &conv3x3_forward(&x, &wt, b).unwrap())
            }));
    }
    worst
}

pub fn dense() -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + case);
        let (n, d_in, d_out) = (
            rng.random_range(1..=4),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        let x = random(&mut rng, &[n, d_in]);
        let wt = random(&mut rng, &[d_out, d_in]);
        let b = random(&mut rng, &[d_out]);
        let up = random(&mut rng, &[n, d_out]);
        let mut layer = Dense::new(wt.clone(), b.clone()).unwrap();
        let dx = layer.backward(&up, &x).unwrap();
        let eval = |x: &Tensor, wt: &Tensor, b: &Tensor| {
            dot(&up, &Dense::new(wt.clone(), b.clone()).unwrap().forward(x).unwrap())
        };
        worst = worst
            .max(check_all(&x, &dx, |x| eval(x, &wt, &b)))
            .max(check_all(&wt, &layer.weight_grad, |wt| eval(&x, wt, &b)))
            .max(check_all(&b, &layer.bias_grad, |b| eval(&x, &wt, b)));
    }
    worst
}

pub fn maxpool() -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + case);
        let c = rng.random_range(1..=4);
        let (h, w) = (2 * rng.random_range(1..=4), 2 * rng.random_range(1..=4));
        // A shuffled ramp keeps every window's maximum unique by a wide margin.
        let mut values: Vec<f64> = (0..c * h * w).map(|i| i as f64 * 0.01).collect();
        for i in (1..values.len()).rev() {
            values.swap(i, rng.random_range(0..=i));
        }
        let x = Tensor::new(vec![c, h, w], values).unwrap();
        let pooled = maxpool2x2_forward(&x).unwrap();
        let up = random(&mut rng, pooled.output.shape());
        let dx = maxpool2x2_backward(&up, &pooled.argmax, x.shape()).unwrap();
        worst = worst.max(check_all(&x, &dx, |x| dot(&up, &maxpool2x2_forward(x).unwrap().output)));
    }
    worst
}

pub fn upsample() -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + case);
        let shape = [
            rng.random_range(1..=4),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
        ];
        let x = random(&mut rng, &shape);
        let up = random(&mut rng, &[shape[0], shape[1] * 2, shape[2] * 2]);
        let dx = upsample2x2_backward(&up).unwrap();
        worst = worst.max(check_all(&x, &dx, |x| dot(&up, &upsample2x2_nearest(x).unwrap())));
    }
    worst
}

pub fn activations() -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + case);
        let shape = [
            rng.random_range(1..=4),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        ];
        let x = away_from_zero(&mut rng, &shape);
        let up = random(&mut rng, &shape);
        for kind in [Activation::Relu, Activation::Sigmoid] {
            let y = activation(&x, kind);
            let dx = activation_backward(&up, &y, kind);
            worst = worst.max(check_all(&x, &dx, |x| dot(&up, &activation(x, kind))));
        }
    }
    worst
}

pub fn losses() -> f64 {
    let mut worst: f64 = 0.0;
    for case in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + case);
        let shape = [rng.random_range(1..=4), rng.random_range(1..=8)];
        let p = Tensor::from_fn(&shape, |_| rng.random_range(0.05..0.95));
        let t = Tensor::from_fn(&shape, |_| rng.random_range(0.0..=1.0));
        worst = worst.max(check_all(&p, &bce_grad(&p, &t).unwrap(), |p| bce_loss(p, &t).unwrap()));
        let a = away_from_zero(&mut rng, &shape);
        let (_, g) = l1_penalty(&a, 0.3);
        worst = worst.max(check_all(&a, &g, |a| l1_penalty(a, 0.3).0));
    }
    worst
}

/// Whole-network gradient against differences of the batch loss, at three
/// random entries of every parameter tensor. Returns the worst excess of
/// `|analytic - numeric|` over `TOL * scale + 1e-8`; at most zero passes.
pub fn full_model() -> f64 {
    let mut model = AutoencoderModel::build(3, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // Zero biases put many ReLU inputs exactly on the kink; move them off.
    for t in model.params_mut().into_iter().filter(|t| t.shape().len() == 1) {
        t.data_mut().iter_mut().for_each(|b| *b = rng.random_range(0.02..0.1));
    }
    let xs = Tensor::from_fn(&[2, 1, 28, 28], |_| rng.random_range(0.0..1.0));
    model.compute_gradients(&xs).unwrap();
    let grads: Vec<Tensor> = model.grads().into_iter().cloned().collect();
    let mut worst = f64::NEG_INFINITY;
    for (p, grad) in grads.iter().enumerate() {
        for _ in 0..3 {
            let i = rng.random_range(0..grad.len());
            let loss_at = |delta: f64| {
                let mut m = model.clone();
                m.params_mut()[p].data_mut()[i] += delta;
                m.batch_loss(&xs).unwrap().total()
            };
            let numeric = (loss_at(H) - loss_at(-H)) / (2.0 * H);
            let analytic = grad.data()[i];
            // Loss rounding noise bounds the numeric estimate to about 1e-8.
            let allowed = TOL * analytic.abs().max(numeric.abs()) + 1e-8;
            worst = worst.max((analytic - numeric).abs() - allowed);
        }
    }
    worst
}

/// `(name, worst relative error)` for every layer family.
pub fn all_layers() -> Vec<(&'static str, f64)> {
    vec![
        ("conv3x3", conv()),
        ("dense", dense()),
        ("maxpool", maxpool()),
        ("upsample", upsample()),
        ("activation", activations()),
        ("loss", losses()),
    ]
}
