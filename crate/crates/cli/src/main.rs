//! `plumeop` command-line interface.
//!
//! Every subcommand resolves its configuration in three layers: built-in
//! defaults, an optional `--config` JSON file, then explicit flags. Exit
//! codes: 0 on success, 2 for configuration or input errors, 3 when a
//! numerical routine fails to converge or a system is too ill-conditioned.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plumeop::commands;
use plumeop::config::{
    load_config, EvaluateConfig, FitConfig, GenerateConfig, GpConfig, OperatorKind, QoiConfig,
    QoiEstimator, SweepAxis, SweepConfig,
};
use plumeop::Result;

#[derive(Parser)]
#[command(
    name = "plumeop",
    version,
    about = "Reduced-order surrogate operators for fire-driven smoke transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fire/smoke snapshot dataset.
    Generate(GenerateArgs),
    /// Fit a surrogate operator on the training part of a dataset.
    Fit(FitArgs),
    /// Score a fitted model on one dataset part.
    Evaluate(EvaluateArgs),
    /// Run a quantity-of-interest convergence study on the holdout fires.
    Qoi(QoiArgs),
    /// Sweep one hyperparameter and score each point on validation.
    Sweep(SweepArgs),
    /// Fit and score the Gaussian-process baseline.
    Gp(GpArgs),
}

fn base<T: Default + serde::de::DeserializeOwned>(config: &Option<PathBuf>) -> Result<T> {
    match config {
        Some(path) => load_config(path),
        None => Ok(T::default()),
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for the dataset artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for scenario sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of fires to simulate.
    #[arg(long)]
    n_fires: Option<usize>,
}

impl GenerateArgs {
    fn resolve(&self) -> Result<GenerateConfig> {
        let mut cfg: GenerateConfig = base(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n_fires) = self.n_fires {
            cfg.generator.n_fires = n_fires;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run directory for the model artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the fire-level split shuffle.
    #[arg(long)]
    seed: Option<u64>,
    /// Operator family.
    #[arg(long, value_enum)]
    kind: Option<OperatorKind>,
    /// Energy fraction for rank selection.
    #[arg(long)]
    energy: Option<f64>,
    /// Explicit input-basis rank (overrides the energy rule).
    #[arg(long)]
    rank_in: Option<usize>,
    /// Explicit output-basis rank (overrides the energy rule).
    #[arg(long)]
    rank_out: Option<usize>,
    /// Ridge weight for quadratic fits.
    #[arg(long)]
    lambda: Option<f64>,
    /// Clamp decoded predictions at zero.
    #[arg(long)]
    clamp_nonneg: Option<bool>,
    /// Fit against log-transformed smoke fields.
    #[arg(long)]
    log_transform: Option<bool>,
}

impl FitArgs {
    fn resolve(&self) -> Result<FitConfig> {
        let mut cfg: FitConfig = base(&self.config)?;
        if let Some(v) = &self.manifest {
            cfg.manifest = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.kind {
            cfg.kind = v;
        }
        if let Some(v) = self.energy {
            cfg.energy = v;
        }
        if let Some(v) = self.rank_in {
            cfg.rank_in = Some(v);
        }
        if let Some(v) = self.rank_out {
            cfg.rank_out = Some(v);
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.clamp_nonneg {
            cfg.clamp_nonneg = v;
        }
        if let Some(v) = self.log_transform {
            cfg.log_transform = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Model directory written by `fit`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// split.json written by `fit`.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Run directory for the reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset part to score: train, validation, or test.
    #[arg(long)]
    part: Option<String>,
    /// Coverage level for the smoke threshold.
    #[arg(long)]
    beta: Option<f64>,
    /// Cap on ROC grid size per snapshot.
    #[arg(long)]
    n_thresholds: Option<usize>,
}

impl EvaluateArgs {
    fn resolve(&self) -> Result<EvaluateConfig> {
        let mut cfg: EvaluateConfig = base(&self.config)?;
        if let Some(v) = &self.manifest {
            cfg.manifest = v.clone();
        }
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.split {
            cfg.split = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.part {
            cfg.part = v.clone();
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.n_thresholds {
            cfg.n_thresholds = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct QoiArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// split.json written by `fit`.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Run directory for the study results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimator variant.
    #[arg(long, value_enum)]
    estimator: Option<QoiEstimator>,
    /// Model directory (surrogate estimator only).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Energy fraction for the reduced estimator's basis.
    #[arg(long)]
    energy: Option<f64>,
    /// Sample counts; repeat the flag for several values.
    #[arg(long = "m-prime")]
    m_prime: Vec<usize>,
    /// Shuffle repetitions per sample count.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Seed for the shuffles.
    #[arg(long)]
    seed: Option<u64>,
}

impl QoiArgs {
    fn resolve(&self) -> Result<QoiConfig> {
        let mut cfg: QoiConfig = base(&self.config)?;
        if let Some(v) = &self.manifest {
            cfg.manifest = v.clone();
        }
        if let Some(v) = &self.split {
            cfg.split = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.estimator {
            cfg.estimator = v;
        }
        if let Some(v) = &self.model {
            cfg.model = Some(v.clone());
        }
        if let Some(v) = self.energy {
            cfg.energy = v;
        }
        if !self.m_prime.is_empty() {
            cfg.m_prime = self.m_prime.clone();
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter axis to walk.
    #[arg(long, value_enum)]
    axis: Option<SweepAxis>,
    /// Grid values; repeat the flag for several points.
    #[arg(long = "grid")]
    grid: Vec<f64>,
    /// Run directory for the sweep table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset manifest for the base fit.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Operator family for the base fit.
    #[arg(long, value_enum)]
    kind: Option<OperatorKind>,
    /// Coverage level used on non-beta axes.
    #[arg(long)]
    beta: Option<f64>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepConfig> {
        let mut cfg: SweepConfig = base(&self.config)?;
        if let Some(v) = self.axis {
            cfg.axis = v;
        }
        if !self.grid.is_empty() {
            cfg.grid = self.grid.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.manifest {
            cfg.base.manifest = v.clone();
        }
        if let Some(v) = self.kind {
            cfg.base.kind = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GpArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run directory for the baseline artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the split shuffle and training subsample.
    #[arg(long)]
    seed: Option<u64>,
    /// Input representation.
    #[arg(long, value_enum)]
    variant: Option<plumeop::config::GpVariant>,
    /// Training pairs kept after subsampling.
    #[arg(long)]
    subsample: Option<usize>,
    /// Length-scale candidates; repeat the flag for several values.
    #[arg(long = "length-scale")]
    length_scales: Vec<f64>,
    /// Kernel noise variance.
    #[arg(long)]
    noise: Option<f64>,
    /// Dataset part to score.
    #[arg(long)]
    part: Option<String>,
    /// Coverage level for the smoke threshold.
    #[arg(long)]
    beta: Option<f64>,
}

impl GpArgs {
    fn resolve(&self) -> Result<GpConfig> {
        let mut cfg: GpConfig = base(&self.config)?;
        if let Some(v) = &self.manifest {
            cfg.manifest = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(v) = self.subsample {
            cfg.subsample = v;
        }
        if !self.length_scales.is_empty() {
            cfg.length_scales = self.length_scales.clone();
        }
        if let Some(v) = self.noise {
            cfg.noise = v;
        }
        if let Some(v) = &self.part {
            cfg.part = v.clone();
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(args) => {
            let cfg = args.resolve()?;
            commands::cmd_generate(&cfg)?;
            println!("dataset written to {}", cfg.out.display());
        }
        Command::Fit(args) => {
            let cfg = args.resolve()?;
            let metrics = commands::cmd_fit(&cfg)?;
            println!(
                "fit {} operator: rank {} -> {}, train rel err {:.3e}, model in {}",
                metrics.kind,
                metrics.rank_in,
                metrics.rank_out,
                metrics.train_rel_err,
                cfg.out.display()
            );
        }
        Command::Evaluate(args) => {
            let cfg = args.resolve()?;
            let summary = commands::cmd_evaluate(&cfg)?;
            println!(
                "evaluated part '{}': tau {:.6}, median AUC {:.4}, median IoU {:.4}, reports in {}",
                cfg.part,
                summary.tau,
                summary.median_auc,
                summary.median_iou,
                cfg.out.display()
            );
        }
        Command::Qoi(args) => {
            let cfg = args.resolve()?;
            commands::cmd_qoi(&cfg)?;
            println!("qoi study written to {}", cfg.out.display());
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            commands::cmd_sweep(&cfg)?;
            println!("sweep table written to {}", cfg.out.display());
        }
        Command::Gp(args) => {
            let cfg = args.resolve()?;
            let summary = commands::cmd_baseline_gp(&cfg)?;
            println!(
                "gp baseline on part '{}': median AUC {:.4}, median IoU {:.4}, reports in {}",
                cfg.part,
                summary.median_auc,
                summary.median_iou,
                cfg.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
