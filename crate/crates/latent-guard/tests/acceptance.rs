//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. MNIST is read from `LATENT_GUARD_DATA_DIR`, else `data/mnist`
//! under the workspace root. Trained class-0 bundles are cached under
//! `target/acceptance/class0` and reused on later runs.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use latent_guard::bundle::{self, read_manifest};
use latent_guard::idx::find_split;
use latent_guard::idx::Split;
use latent_guard::pipeline::{self, bundle_dir, SweepOptions, SweepRow};
use latent_guard_core::manifold::ManifoldSpec;
use latent_guard_core::metrics::{aupr, auroc, fpr_at_tpr};
use latent_guard_core::{EvalReport, Label, ScoreMode, ScoredSet, TrainConfig};

type Outcome = Result<String, String>;

const BOTTLENECKS: [usize; 4] = [8, 16, 32, 128];
const SEED: u64 = 1;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data_dir() -> PathBuf {
    std::env::var_os("LATENT_GUARD_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace().join("data/mnist"))
}

fn cache_dir() -> PathBuf {
    std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace().join("target"))
        .join("acceptance/class0")
}

fn require_mnist() -> Result<PathBuf, String> {
    let dir = data_dir();
    for split in [Split::Train, Split::Test] {
        find_split(&dir, split).map_err(|e| format!("MNIST not available: {e}"))?;
    }
    Ok(dir)
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let layers = oracle::fd::all_layers();
    let excess = oracle::fd::full_model();
    let secs = start.elapsed().as_secs_f64();
    let worst = layers.iter().map(|l| l.1).fold(0.0, f64::max);
    let detail = format!(
        "{} worst rel err {worst:.2e} over {} cases per layer, full model {}, {secs:.1}s",
        layers
            .iter()
            .map(|(n, e)| format!("{n}={e:.1e}"))
            .collect::<Vec<_>>()
            .join(" "),
        oracle::fd::CASES,
        if excess <= 0.0 { "ok" } else { "mismatch" },
    );
    if worst <= oracle::fd::TOL && excess <= 0.0 && secs < 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Worst deviation from the brute-force oracles per metric:
/// `[auroc, aupr_in, aupr_out, fpr95]`.
fn metric_deviations() -> [f64; 4] {
    let mut r = oracle::rng(2024);
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let (inl, ood) = oracle::random_groups(&mut r, 200);
        let set = ScoredSet::from_groups(&inl, &ood).expect("valid set");
        let got = [
            auroc(&set).expect("auroc") - oracle::auroc_pairs(&inl, &ood),
            aupr(&set, Label::Inlier).expect("aupr") - oracle::aupr_enumerate(&inl, &ood, Label::Inlier),
            aupr(&set, Label::Ood).expect("aupr") - oracle::aupr_enumerate(&inl, &ood, Label::Ood),
            fpr_at_tpr(&set, 0.95).expect("fpr") - oracle::fpr95_enumerate(&inl, &ood),
        ];
        for (w, g) in worst.iter_mut().zip(got) {
            *w = w.max(g.abs());
        }
    }
    worst
}

fn metric_oracles(dev: &[f64; 4]) -> Outcome {
    let detail = format!(
        "100 sets, max |diff| auroc {:.1e} aupr_in {:.1e} aupr_out {:.1e} fpr95 {:.1e}",
        dev[0], dev[1], dev[2], dev[3]
    );
    if dev.iter().all(|&d| d <= 1e-9) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mahalanobis() -> Outcome {
    let affine = oracle::affine_equivariance_error(11);
    let at_mean = oracle::distance_at_mean(12);
    let euclid = oracle::identity_is_euclidean(13);
    let detail = format!("affine rel err {affine:.1e}, D(mu) = {at_mean}, identity == euclidean: {euclid}");
    if affine <= 1e-8 && at_mean == 0.0 && euclid {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn far_point() -> Outcome {
    let start = Instant::now();
    let c = oracle::far_point_check(ManifoldSpec::linear(2, 1), 500, 3);
    let detail = format!(
        "RE {:.2e} < inlier median {:.2e}; H {:.1} > inlier p99 {:.2}; FPR95 RE {} H {}; {:.2}s",
        c.far_re,
        c.inlier_re_median,
        c.far_h,
        c.inlier_h_p99,
        c.re_fpr,
        c.h_fpr,
        start.elapsed().as_secs_f64()
    );
    if c.holds() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Trains any missing class-0 bundles and returns the sweep rows, after
/// checking every cached bundle used the full training procedure.
fn class0_sweep() -> Result<Vec<SweepRow>, String> {
    let data = require_mnist()?;
    let opts = SweepOptions {
        classes: vec![0],
        bottlenecks: BOTTLENECKS.to_vec(),
        seeds: vec![SEED],
        base: TrainConfig::new(0, 1, SEED),
        out_dir: cache_dir(),
        jobs: 1,
        resume: true,
    };
    for &k in &BOTTLENECKS {
        let dir = bundle_dir(&opts.out_dir, 0, k, SEED);
        if dir.join(bundle::MANIFEST).exists() {
            let m = read_manifest(&dir).map_err(|e| e.to_string())?;
            if m.config != TrainConfig::new(0, k, SEED) {
                return Err(format!("{} was trained with a different configuration", dir.display()));
            }
        } else {
            eprintln!("training class 0 k={k} into {} (slow)", dir.display());
        }
    }
    let log = |line: &str| eprintln!("  {line}");
    let outcome = pipeline::run_sweep(&opts, &data, &log).map_err(|e| e.to_string())?;
    if let Some(f) = outcome.failures.first() {
        return Err(format!("k={} failed: {}", f.k, f.error));
    }
    Ok(outcome.rows)
}

fn metric(rows: &[SweepRow], k: usize, mode: ScoreMode) -> (f64, f64) {
    let r = rows.iter().find(|r| r.k == k && r.mode == mode).expect("row present");
    (r.fpr95.expect("fpr"), r.auroc.expect("auroc"))
}

fn reproduction(rows: &[SweepRow]) -> Outcome {
    let mut parts = Vec::new();
    let mut improved = 0;
    for k in [8, 16, 32] {
        let (re, _) = metric(rows, k, ScoreMode::Re);
        let (h, _) = metric(rows, k, ScoreMode::Hybrid);
        if h <= re {
            improved += 1;
        }
        parts.push(format!("k={k} FPR95 RE {re:.3} H {h:.3}"));
    }
    let h16 = metric(rows, 16, ScoreMode::Hybrid).1;
    let re8 = metric(rows, 8, ScoreMode::Re).1;
    let (a, b, c) = (improved >= 2, h16 >= 0.97, re8 >= 0.93);
    let detail = format!(
        "(a) {} [{improved}/3 H<=RE]; (b) {} H AUROC@16 {h16:.4}; (c) {} RE AUROC@8 {re8:.4}",
        parts.join(", "),
        if b { "ok" } else { "low" },
        if c { "ok" } else { "low" },
    );
    if a && b && c {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn degradation(rows: &[SweepRow]) -> Outcome {
    let (f16, _) = metric(rows, 16, ScoreMode::Re);
    let (f128, _) = metric(rows, 128, ScoreMode::Re);
    let detail = format!("RE FPR95 k=128 {f128:.3} vs k=16 {f16:.3}");
    if f128 > f16 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_latent-guard"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).trim().to_string());
    }
    Ok(o.stdout)
}

fn train_and_eval(data: &Path, out: &Path) -> Result<(Vec<EvalReport>, Vec<u8>), String> {
    let d = data.to_str().unwrap();
    let b = out.to_str().unwrap();
    run_cli(&[
        "train",
        "--quiet",
        "--class",
        "3",
        "--bottleneck",
        "8",
        "--seed",
        "7",
        "--out",
        b,
        "--data-dir",
        d,
        "--max-epochs",
        "2",
        "--patience",
        "1",
    ])?;
    let mut reports = Vec::new();
    let mut raw = Vec::new();
    for mode in ScoreMode::ALL {
        let stdout = run_cli(&["eval", "--bundle", b, "--data-dir", d, "--mode", mode.as_str()])?;
        reports.push(serde_json::from_slice(&stdout).map_err(|e| e.to_string())?);
        raw.extend(stdout);
    }
    raw.extend(std::fs::read(out.join(bundle::SCORES)).map_err(|e| e.to_string())?);
    Ok((reports, raw))
}

fn determinism() -> Outcome {
    let data = require_mnist()?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, raw_a) = train_and_eval(&data, &tmp.path().join("a"))?;
    let (b, raw_b) = train_and_eval(&data, &tmp.path().join("b"))?;
    let bits = |r: &[EvalReport]| -> Vec<u64> {
        r.iter()
            .flat_map(|x| [x.fpr_at_95_tpr, x.auroc, x.aupr_in, x.aupr_out])
            .map(f64::to_bits)
            .collect()
    };
    let same = a == b && bits(&a) == bits(&b) && raw_a == raw_b;
    let detail = format!(
        "class 3 k=8 seed 7, 2 epochs, two runs: reports {} and score tables {}",
        if a == b && bits(&a) == bits(&b) {
            "identical"
        } else {
            "differ"
        },
        if raw_a == raw_b { "byte-identical" } else { "differ" },
    );
    if same {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn aupr_out_scope(dev: &[f64; 4]) -> Outcome {
    let detail = format!(
        "AUPR(out) checked by oracle equivalence only, max |diff| {:.1e}",
        dev[2]
    );
    if dev[2] <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, outcome: Outcome| match outcome {
        Ok(d) => println!("PASS [{n}] {name}: {d}"),
        Err(d) => {
            failed += 1;
            println!("FAIL [{n}] {name}: {d}");
        }
    };
    report(1, "gradient correctness", gradients());
    let dev = metric_deviations();
    report(2, "metric oracle equivalence", metric_oracles(&dev));
    report(3, "Mahalanobis properties", mahalanobis());
    report(4, "far on-manifold point", far_point());
    match class0_sweep() {
        Ok(rows) => {
            report(5, "class-0 reproduction", reproduction(&rows));
            report(6, "bottleneck degradation", degradation(&rows));
        }
        Err(e) => {
            report(5, "class-0 reproduction", Err(e.clone()));
            report(6, "bottleneck degradation", Err(e));
        }
    }
    report(7, "train+eval determinism", determinism());
    report(8, "AUPR(out) scope", aupr_out_scope(&dev));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
