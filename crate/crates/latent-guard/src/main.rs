use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_guard::error::{Error, Result};
use latent_guard::pipeline::{self, SweepOptions};
use latent_guard_core::trainer::TrainConfig;
use latent_guard_core::ScoreMode;

#[derive(Parser)]
#[command(
    name = "latent-guard",
    version,
    about = "One-class autoencoder OOD detection on MNIST"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one autoencoder and write an experiment bundle.
    Train(TrainArgs),
    /// Score the MNIST test split with a bundle and report metrics.
    Eval(EvalArgs),
    /// Train and evaluate a grid of classes, bottlenecks and seeds.
    Sweep(SweepArgs),
    /// Scatter plot of a scores CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct DataDir {
    /// Directory holding the MNIST IDX files (optionally gzipped).
    #[arg(long, env = "LATENT_GUARD_DATA_DIR")]
    data_dir: PathBuf,
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    max_epochs: u32,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..))]
    batch_size: u32,
    /// Validation samples drawn from the full training split before class filtering.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u32).range(1..))]
    val_size: u32,
}

impl Overrides {
    fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        c.max_epochs = self.max_epochs as usize;
        c.patience = self.patience;
        c.batch_size = self.batch_size as usize;
        c.val_size = self.val_size as usize;
        c
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Inlier digit.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=9))]
    class: u8,
    /// Bottleneck (latent) size.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    bottleneck: u32,
    #[arg(long)]
    seed: u64,
    /// Bundle directory to create.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    data: DataDir,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[command(flatten)]
    data: DataDir,
    #[arg(long, default_value = "H", value_parser = parse_mode)]
    mode: ScoreMode,
}

#[derive(Args)]
struct SweepArgs {
    /// Inlier digits, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u8).range(0..=9))]
    class: Vec<u8>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..))]
    bottlenecks: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// Output directory for bundles and the aggregate CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    data: DataDir,
    #[command(flatten)]
    overrides: Overrides,
    /// Concurrent configurations.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Reuse bundles that already exist instead of retraining.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    scores_csv: PathBuf,
    #[arg(long)]
    out_svg: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<ScoreMode, String> {
    ScoreMode::parse(s).ok_or_else(|| format!("unknown mode {s:?}, expected RE, LD or H"))
}

fn stderr_log(line: &str) {
    eprintln!("{line}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => {
            let config = a
                .overrides
                .apply(TrainConfig::new(a.class, a.bottleneck as usize, a.seed));
            let log: pipeline::Log = if a.quiet { &pipeline::quiet } else { &stderr_log };
            pipeline::run_train(&config, &a.data.data_dir, &a.out, log)?;
            println!("{}", a.out.display());
        }
        Command::Eval(a) => {
            let reports = pipeline::run_eval(&a.bundle, &a.data.data_dir, &[a.mode])?;
            println!("{}", pipeline::report_json(&reports[0])?);
        }
        Command::Sweep(a) => {
            let opts = SweepOptions {
                classes: a.class,
                bottlenecks: a.bottlenecks.iter().map(|&k| k as usize).collect(),
                seeds: a.seeds,
                base: a.overrides.apply(TrainConfig::new(0, 1, 0)),
                out_dir: a.out,
                jobs: a.jobs as usize,
                resume: a.resume,
            };
            let log: pipeline::Log = if a.quiet { &pipeline::quiet } else { &stderr_log };
            let outcome = pipeline::run_sweep(&opts, &a.data.data_dir, log)?;
            println!("{}", opts.out_dir.join(pipeline::SWEEP_CSV).display());
            if !outcome.failures.is_empty() {
                return Err(Error::PartialSweep {
                    failed: outcome.failures.len(),
                    total: outcome.rows.len() / ScoreMode::ALL.len(),
                });
            }
        }
        Command::Plot(a) => {
            pipeline::run_plot(&a.scores_csv, &a.out_svg)?;
            println!("{}", a.out_svg.display());
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[E_USAGE]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), one_line(&e.to_string()));
            ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 1 })
        }
    }
}
