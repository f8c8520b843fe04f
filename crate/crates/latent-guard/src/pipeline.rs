//! Train, evaluate and sweep drivers shared by the CLI and tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use latent_guard_core::metrics::{evaluate, EvalMeta};
use latent_guard_core::novelty::{calibrate, features, LatentModel};
use latent_guard_core::trainer::{inlier_split, train, EpochRecord, TrainConfig};
use latent_guard_core::{EvalReport, GaussianStats, ImageDataset, ScoreMode};
use serde::Serialize;

use crate::bundle::{self, ExperimentBundle, Manifest};
use crate::error::{Error, Result};
use crate::idx::{load_split, Split};
use crate::scores::{self, ScoreRow};

/// Sink for human-readable progress lines.
pub type Log<'a> = &'a (dyn Fn(&str) + Sync);

pub fn quiet(_: &str) {}

/// Trains on the class-filtered split of `full_train`, then fits the latent
/// Gaussian on the training inliers and calibrates on the validation inliers.
pub fn fit_bundle(
    config: &TrainConfig,
    full_train: &ImageDataset,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<ExperimentBundle> {
    let (train_set, val_set) = inlier_split(config, full_train)?;
    let (model, record) = train(config, &train_set, &val_set, on_epoch)?;
    let (z, _) = model.embed_batch(train_set.pixels())?;
    let stats = GaussianStats::fit(&z, model.latent_dim())?;
    let calibration = calibrate(&model, &stats, val_set.pixels())?;
    Ok(ExperimentBundle {
        config: *config,
        model,
        stats,
        calibration: Some(calibration),
        record,
    })
}

fn epoch_logger<'a>(tag: &'a str, log: Log<'a>) -> impl FnMut(&EpochRecord) + 'a {
    move |r| {
        log(&format!(
            "{tag}epoch {} train_loss {:.6} val_loss {:.6}",
            r.epoch, r.train_loss, r.val_loss
        ))
    }
}

pub fn run_train(config: &TrainConfig, data_dir: &Path, out: &Path, log: Log) -> Result<Manifest> {
    config.validate()?;
    if out.exists() {
        return Err(Error::bundle(out, "already exists"));
    }
    let full = load_split(data_dir, Split::Train)?;
    let bundle = fit_bundle(config, &full, epoch_logger("", log))?;
    log(&format!(
        "best epoch {} val_loss {:.6}",
        bundle.record.best_epoch, bundle.record.best_val_loss
    ));
    bundle.save(out)
}

/// Scores every test image; inliers are the bundle's training class.
pub fn score_test_set(bundle: &ExperimentBundle, test: &ImageDataset) -> Result<Vec<ScoreRow>> {
    test.expect_mnist_geometry()?;
    let f = features(&bundle.model, &bundle.stats, test.pixels())?;
    let inlier: Vec<bool> = test.labels().iter().map(|&l| l == bundle.config.inlier_class).collect();
    Ok(scores::rows_from_features(&f, &inlier, bundle.calibration.as_ref()))
}

pub fn report(config: &TrainConfig, rows: &[ScoreRow], mode: ScoreMode) -> Result<EvalReport> {
    let set = scores::scored_set(rows, mode)?;
    Ok(evaluate(
        &set,
        EvalMeta {
            inlier_class: config.inlier_class,
            bottleneck_size: config.bottleneck_size,
            mode,
            seed: config.seed,
        },
    )?)
}

fn write_replacing(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn report_json(report: &EvalReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Evaluates a saved bundle on the test split, writing `scores.csv` and one
/// `eval_<mode>.json` per mode into the bundle directory.
pub fn evaluate_bundle(dir: &Path, test: &ImageDataset, modes: &[ScoreMode]) -> Result<Vec<EvalReport>> {
    let bundle = ExperimentBundle::load(dir)?;
    if modes.contains(&ScoreMode::Hybrid) && bundle.calibration.is_none() {
        return Err(latent_guard_core::Error::MissingCalibration.into());
    }
    let rows = score_test_set(&bundle, test)?;
    write_replacing(&dir.join(bundle::SCORES), &scores::to_csv_bytes(&rows)?)?;
    let mut out = Vec::with_capacity(modes.len());
    for &mode in modes {
        let r = report(&bundle.config, &rows, mode)?;
        let mut text = report_json(&r)?;
        text.push('\n');
        write_replacing(&dir.join(bundle::eval_file(mode)), text.as_bytes())?;
        out.push(r);
    }
    Ok(out)
}

pub fn run_eval(dir: &Path, data_dir: &Path, modes: &[ScoreMode]) -> Result<Vec<EvalReport>> {
    bundle::read_manifest(dir)?;
    let test = load_split(data_dir, Split::Test)?;
    evaluate_bundle(dir, &test, modes)
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub classes: Vec<u8>,
    pub bottlenecks: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Template for every run; class, bottleneck and seed are overwritten.
    pub base: TrainConfig,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub resume: bool,
}

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_FAILURES: &str = "failures.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub class: u8,
    pub k: usize,
    pub seed: u64,
    pub mode: ScoreMode,
    pub fpr95: Option<f64>,
    pub auroc: Option<f64>,
    pub aupr_in: Option<f64>,
    pub aupr_out: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub class: u8,
    pub k: usize,
    pub seed: u64,
    pub code: &'static str,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

pub fn bundle_dir(out_dir: &Path, class: u8, k: usize, seed: u64) -> PathBuf {
    out_dir.join("bundles").join(format!("class{class}_k{k}_seed{seed}"))
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Trains (unless resuming onto an existing bundle) and evaluates one grid
/// point in every mode.
fn sweep_point(
    opts: &SweepOptions,
    config: &TrainConfig,
    train_set: &ImageDataset,
    test: &ImageDataset,
    log: Log,
) -> Result<Vec<EvalReport>> {
    let dir = bundle_dir(&opts.out_dir, config.inlier_class, config.bottleneck_size, config.seed);
    let tag = format!(
        "[class {} k {} seed {}] ",
        config.inlier_class, config.bottleneck_size, config.seed
    );
    let existing = opts.resume && dir.join(bundle::MANIFEST).exists();
    if existing {
        let cached: Option<Vec<EvalReport>> = ScoreMode::ALL
            .iter()
            .map(|&m| read_report(&dir.join(bundle::eval_file(m))).ok())
            .collect();
        if let Some(reports) = cached {
            log(&format!("{tag}resumed from existing bundle"));
            return Ok(reports);
        }
    } else {
        if dir.exists() {
            return Err(Error::bundle(&dir, "already exists; pass --resume to reuse it"));
        }
        let b = fit_bundle(config, train_set, epoch_logger(&tag, log))?;
        b.save(&dir)?;
    }
    log(&format!("{tag}evaluating"));
    evaluate_bundle(&dir, test, &ScoreMode::ALL)
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "k", "seed", "mode", "fpr95", "auroc", "aupr_in", "aupr_out"])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.class.to_string(),
            r.k.to_string(),
            r.seed.to_string(),
            r.mode.as_str().to_string(),
            cell(r.fpr95),
            cell(r.auroc),
            cell(r.aupr_in),
            cell(r.aupr_out),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
    write_replacing(path, &bytes)
}

/// Runs the full grid with up to `jobs` concurrent configurations. A failed
/// configuration yields rows with empty metrics and a failure record.
pub fn run_sweep_with_data(
    opts: &SweepOptions,
    train_set: &ImageDataset,
    test: &ImageDataset,
    log: Log,
) -> Result<SweepOutcome> {
    if opts.classes.is_empty() || opts.bottlenecks.is_empty() || opts.seeds.is_empty() {
        return Err(Error::Usage(
            "sweep needs at least one class, bottleneck and seed".into(),
        ));
    }
    let mut points = Vec::new();
    for &class in &opts.classes {
        for &k in &opts.bottlenecks {
            for &seed in &opts.seeds {
                let mut c = opts.base;
                c.inlier_class = class;
                c.bottleneck_size = k;
                c.seed = seed;
                c.validate()?;
                points.push(c);
            }
        }
    }
    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;

    let results: Vec<Mutex<Option<Result<Vec<EvalReport>>>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = opts.jobs.clamp(1, points.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = points.get(i) else { break };
                let r = sweep_point(opts, config, train_set, test, log);
                *results[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (config, slot) in points.iter().zip(results) {
        let result = slot
            .into_inner()
            .expect("result slot poisoned")
            .expect("every point ran");
        match result {
            Ok(reports) => rows.extend(reports.into_iter().map(|r| SweepRow {
                class: r.inlier_class,
                k: r.bottleneck_size,
                seed: r.seed,
                mode: r.mode,
                fpr95: Some(r.fpr_at_95_tpr),
                auroc: Some(r.auroc),
                aupr_in: Some(r.aupr_in),
                aupr_out: Some(r.aupr_out),
            })),
            Err(e) => {
                log(&format!(
                    "[class {} k {} seed {}] failed: error[{}]: {e}",
                    config.inlier_class,
                    config.bottleneck_size,
                    config.seed,
                    e.code()
                ));
                rows.extend(ScoreMode::ALL.iter().map(|&mode| SweepRow {
                    class: config.inlier_class,
                    k: config.bottleneck_size,
                    seed: config.seed,
                    mode,
                    fpr95: None,
                    auroc: None,
                    aupr_in: None,
                    aupr_out: None,
                }));
                failures.push(SweepFailure {
                    class: config.inlier_class,
                    k: config.bottleneck_size,
                    seed: config.seed,
                    code: e.code(),
                    error: e.to_string(),
                });
            }
        }
    }
    write_sweep_csv(&opts.out_dir.join(SWEEP_CSV), &rows)?;
    let failure_path = opts.out_dir.join(SWEEP_FAILURES);
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path).map_err(|e| Error::io(&failure_path, e))?;
        }
    } else {
        let mut text = String::new();
        for f in &failures {
            text.push_str(&serde_json::to_string(f)?);
            text.push('\n');
        }
        write_replacing(&failure_path, text.as_bytes())?;
    }
    Ok(SweepOutcome { rows, failures })
}

pub fn run_sweep(opts: &SweepOptions, data_dir: &Path, log: Log) -> Result<SweepOutcome> {
    let train_set = load_split(data_dir, Split::Train)?;
    let test = load_split(data_dir, Split::Test)?;
    run_sweep_with_data(opts, &train_set, &test, log)
}

pub fn run_plot(scores_csv: &Path, out_svg: &Path) -> Result<usize> {
    let rows = scores::read_scores(scores_csv)?;
    let title = scores_csv
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = crate::plot::render_svg(&rows, &title);
    fs::write(out_svg, svg).map_err(|e| Error::io(out_svg, e))?;
    Ok(rows.len())
}
