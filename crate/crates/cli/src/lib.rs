//! Command-line runner for TSK fuzzy classifier experiments.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tsk_core::DefuzzVariant;

use crate::commands::EvalSplit;
use crate::config::RunConfig;
pub use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "tsk", version, about = "Train and diagnose TSK fuzzy classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model; writes checkpoint, report, diagnostics and config.
    Train(RunArgs),
    /// Score a checkpoint on a dataset and print accuracy and loss as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalSplit::All)]
        split: EvalSplit,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fired-rule sweep over dimensionality, rule count and h.
    Sweep(RunArgs),
    /// Test accuracy versus initial width h.
    Hsweep(RunArgs),
    /// Write a synthetic Gaussian dataset as CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Config file plus overrides. Each typed flag is shorthand for a `--set`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.max_epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Data file; synthetic data is generated when no path is configured.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<DefuzzVariant>,
    #[arg(long)]
    pub rules: Option<usize>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub landscape_eta: Option<f64>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let quote = |p: &PathBuf| toml::Value::String(p.display().to_string()).to_string();
        let mut sets = self.set.clone();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                sets.push(format!("{key}={v}"));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("output_dir", self.output_dir.as_ref().map(quote));
        push("jobs", self.jobs.map(|v| v.to_string()));
        push("data.path", self.data.as_ref().map(quote));
        push("variant", self.variant.map(|v| format!("{:?}", v.name())));
        push("rules", self.rules.map(|v| v.to_string()));
        push("init.h", self.h.map(float));
        push("train.learning_rate", self.learning_rate.map(float));
        push("train.batch_size", self.batch_size.map(|v| v.to_string()));
        push("train.max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("train.patience", self.patience.map(|v| v.to_string()));
        push("diagnostics.landscape_eta", self.landscape_eta.map(float));
        RunConfig::resolve(self.config.as_deref(), &sets)
    }
}

/// TOML float literal (`1` would parse as an integer).
fn float(v: f64) -> String {
    format!("{v:?}")
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

/// Runs one parsed command, printing its JSON result to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let report = with_pool(cfg.jobs, || commands::cmd_train(&cfg))?;
            print_json(&json!({
                "output_dir": cfg.output_dir,
                "epochs": report.train.epochs.len(),
                "best_epoch": report.train.best_epoch,
                "best_val_accuracy": report.train.best_val_accuracy,
                "test_accuracy": report.test.map(|t| t.accuracy),
            }))
        }
        Command::Eval { checkpoint, split, run } => {
            let cfg = run.resolve()?;
            let eval = with_pool(cfg.jobs, || commands::cmd_eval(&checkpoint, &cfg, split))?;
            print_json(&serde_json::to_value(eval)?)
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let summary = with_pool(cfg.jobs, || commands::cmd_sweep(&cfg))?;
            print_json(&json!({ "output_dir": cfg.output_dir, "grid_points": summary.len() }))
        }
        Command::Hsweep(args) => {
            let cfg = args.resolve()?;
            let summary = with_pool(cfg.jobs, || commands::cmd_hsweep(&cfg))?;
            print_json(&json!({
                "output_dir": cfg.output_dir,
                "h_values": summary.h_values,
                "curves": summary.curves,
            }))
        }
        Command::Synth { out, run } => {
            let cfg = run.resolve()?;
            commands::cmd_synth(&cfg, &out)?;
            print_json(&json!({ "out": out }))
        }
        Command::Gradcheck { cases, seed, tolerance, jobs } => {
            if jobs == Some(0) {
                return Err(CliError::Config("jobs must be positive".into()));
            }
            let summary = with_pool(jobs, || commands::cmd_gradcheck(cases, seed, tolerance))?;
            print_json(&serde_json::to_value(&summary)?)?;
            if !summary.passed() {
                return Err(CliError::CheckFailed(format!(
                    "{} of {} cases exceed relative error {tolerance} (worst {:e})",
                    summary.failures, summary.cases, summary.max_relative_error
                )));
            }
            Ok(())
        }
    }
}
