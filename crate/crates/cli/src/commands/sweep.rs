use tsk_core::diagnostics::{saturation_sweep, summarize_sweep, sweep_tidy_rows, write_tidy_csv, SweepSummary};

use super::{create, write_json};
use crate::config::RunConfig;
use crate::error::Result;

pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_SUMMARY: &str = "sweep_summary.json";

/// Fired-rule sweep over every configured variant. Writes one tidy CSV with
/// all variants and a JSON summary with repeat-averaged percentile bands.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SweepSummary>> {
    let dir = &cfg.output_dir;
    cfg.write_resolved(dir)?;
    let spec = cfg.sweep_spec();
    let mut records = Vec::new();
    for &variant in &cfg.sweep.variants {
        records.extend(saturation_sweep(&spec, variant)?);
    }
    write_tidy_csv(&sweep_tidy_rows(&records), create(&dir.join(SWEEP_CSV))?)?;
    let summary = summarize_sweep(&records);
    write_json(&dir.join(SWEEP_SUMMARY), &summary)?;
    Ok(summary)
}
