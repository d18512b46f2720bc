use serde::{Deserialize, Serialize};
use tsk_core::diagnostics::{training_tidy_rows, write_landscape_csv, write_tidy_csv};
use tsk_core::{run_experiment, Checkpoint, DefuzzVariant, Evaluation, TrainReport};

use super::{create, write_json};
use crate::config::RunConfig;
use crate::error::Result;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_FILE: &str = "report.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const LANDSCAPE_FILE: &str = "landscape.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: DefuzzVariant,
    pub rules: usize,
    pub h: f64,
    pub dim: usize,
    pub classes: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub train: TrainReport,
    pub test: Option<Evaluation>,
}

/// Trains one model and writes the checkpoint, report, diagnostics and
/// resolved config into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<RunReport> {
    let dir = &cfg.output_dir;
    cfg.write_resolved(dir)?;
    let data = cfg.load_data(cfg.seed)?;
    let spec = cfg.experiment_spec(cfg.variant, cfg.init.h, data.num_classes(), cfg.seed);
    let (n_train, n_val, n_test) = spec.split.sizes(data.n_samples())?;
    let out = run_experiment(&data, &spec)?;

    let checkpoint = Checkpoint::from_model(
        &out.model,
        Some(out.norm_stats.clone()),
        data.class_values().map(<[i64]>::to_vec),
    )?;
    checkpoint.save(&dir.join(CHECKPOINT_FILE))?;

    let report = RunReport {
        variant: cfg.variant,
        rules: cfg.rules,
        h: cfg.init.h,
        dim: data.dim(),
        classes: data.num_classes(),
        n_train,
        n_val,
        n_test,
        train: out.report,
        test: out.test,
    };
    write_json(&dir.join(REPORT_FILE), &report)?;

    if !out.diagnostics.is_empty() {
        let rows = training_tidy_rows(&out.diagnostics, cfg.variant, data.dim(), cfg.rules, cfg.init.h, 0);
        write_tidy_csv(&rows, create(&dir.join(DIAGNOSTICS_FILE))?)?;
    }
    if !out.landscape.is_empty() {
        write_landscape_csv(
            &out.landscape,
            cfg.variant,
            data.dim(),
            cfg.rules,
            cfg.init.h,
            create(&dir.join(LANDSCAPE_FILE))?,
        )?;
    }
    Ok(report)
}
