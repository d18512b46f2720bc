use std::path::Path;

use clap::ValueEnum;
use tsk_core::data::split;
use tsk_core::{evaluate, Checkpoint, Evaluation};

use crate::config::RunConfig;
use crate::error::Result;

/// Which part of the configured dataset to evaluate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum EvalSplit {
    #[default]
    All,
    Train,
    Val,
    Test,
}

/// Evaluates a checkpoint on raw data from `cfg`. The checkpoint's stored
/// normalization and class values are applied first, so a file written by
/// `train` can be scored directly.
pub fn cmd_eval(checkpoint: &Path, cfg: &RunConfig, part: EvalSplit) -> Result<Evaluation> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.to_model()?;
    let data = cfg.load_data(cfg.seed)?;
    let data = match part {
        EvalSplit::All => data,
        _ => {
            let spec = cfg.experiment_spec(cfg.variant, cfg.init.h, data.num_classes(), cfg.seed).split;
            let parts = split(&data, &spec)?;
            match part {
                EvalSplit::Train => parts.train,
                EvalSplit::Val => parts.val,
                _ => parts.test,
            }
        }
    };
    let data = match (&ckpt.class_values, data.class_values()) {
        (Some(classes), Some(_)) => data.align_classes(classes)?,
        _ => data,
    };
    let data = match &ckpt.norm_stats {
        Some(stats) => stats.transform(&data)?,
        None => data,
    };
    Ok(evaluate(&model, &data)?)
}
