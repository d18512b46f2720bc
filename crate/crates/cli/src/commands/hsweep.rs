use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tsk_core::diagnostics::{median, write_tidy_csv, TidyRow};
use tsk_core::rng::substream_indexed;
use tsk_core::{run_experiment, DefuzzVariant};

use super::{create, write_json};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const HSWEEP_CSV: &str = "hsweep.csv";
pub const HSWEEP_RUNS_CSV: &str = "hsweep_runs.csv";
pub const HSWEEP_SUMMARY: &str = "hsweep_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSweepRun {
    pub variant: DefuzzVariant,
    pub h: f64,
    pub repeat: usize,
    pub best_epoch: usize,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantCurve {
    pub variant: DefuzzVariant,
    /// Median test accuracy over repeats, one per h.
    pub median_accuracy: Vec<f64>,
    /// max - min of the medians.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HSweepSummary {
    pub h_values: Vec<f64>,
    pub repeats: usize,
    pub curves: Vec<VariantCurve>,
    pub runs: Vec<HSweepRun>,
}

impl HSweepSummary {
    pub fn curve(&self, variant: DefuzzVariant) -> Option<&VariantCurve> {
        self.curves.iter().find(|c| c.variant == variant)
    }

    /// Median accuracy of `variant` at `h`.
    pub fn median_at(&self, variant: DefuzzVariant, h: f64) -> Option<f64> {
        let i = self.h_values.iter().position(|&v| v == h)?;
        self.curve(variant).map(|c| c.median_accuracy[i])
    }
}

/// Test accuracy versus initial width `h` for each configured variant.
///
/// Repeat `k` uses master seed `substream(seed, "hsweep", k)` for its data,
/// split and initialization, shared by every (variant, h).
pub fn cmd_hsweep(cfg: &RunConfig) -> Result<HSweepSummary> {
    let hs = &cfg.hsweep;
    if hs.variants.is_empty() || hs.h_values.is_empty() || hs.repeats == 0 {
        return Err(CliError::Config("hsweep needs variants, h_values and repeats".into()));
    }
    let dir = &cfg.output_dir;
    cfg.write_resolved(dir)?;

    let seeds: Vec<u64> = (0..hs.repeats)
        .map(|k| substream_indexed(cfg.seed, "hsweep", &[k as u64]))
        .collect();
    let datasets = seeds.iter().map(|&s| cfg.load_data(s)).collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    for &variant in &hs.variants {
        for &h in &hs.h_values {
            for repeat in 0..hs.repeats {
                points.push((variant, h, repeat));
            }
        }
    }
    let runs: Vec<HSweepRun> = points
        .par_iter()
        .map(|&(variant, h, repeat)| {
            let data = &datasets[repeat];
            let spec = cfg.experiment_spec(variant, h, data.num_classes(), seeds[repeat]);
            let spec = tsk_core::ExperimentSpec { diagnostics: false, landscape_eta: None, ..spec };
            let out = run_experiment(data, &spec)
                .map_err(|e| e.with_numeric_context(&format!("{variant} h={h} repeat={repeat}")))?;
            let test = out
                .test
                .ok_or_else(|| CliError::Config("hsweep needs a nonempty test split".into()))?;
            Ok(HSweepRun { variant, h, repeat, best_epoch: out.report.best_epoch, test_accuracy: test.accuracy })
        })
        .collect::<Result<_>>()?;

    let mut curves = Vec::new();
    for &variant in &hs.variants {
        let mut medians = Vec::new();
        for &h in &hs.h_values {
            let accs: Vec<f64> = runs
                .iter()
                .filter(|r| r.variant == variant && r.h == h)
                .map(|r| r.test_accuracy)
                .collect();
            medians.push(median(&accs)?);
        }
        let hi = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
        curves.push(VariantCurve { variant, median_accuracy: medians, spread: hi - lo });
    }
    let summary = HSweepSummary { h_values: hs.h_values.clone(), repeats: hs.repeats, curves, runs };

    write_wide_csv(&summary, create(&dir.join(HSWEEP_CSV))?)?;
    let dim = datasets[0].dim();
    let rows: Vec<TidyRow> = summary
        .runs
        .iter()
        .map(|r| TidyRow {
            variant: r.variant.name().to_string(),
            dim,
            rules: cfg.rules,
            h: r.h,
            epoch: r.best_epoch,
            repeat: r.repeat,
            metric: "test_accuracy".into(),
            value: r.test_accuracy,
        })
        .collect();
    write_tidy_csv(&rows, create(&dir.join(HSWEEP_RUNS_CSV))?)?;
    write_json(&dir.join(HSWEEP_SUMMARY), &summary)?;
    Ok(summary)
}

/// `h,<variant>_accuracy,...` with one row per h.
fn write_wide_csv<W: std::io::Write>(summary: &HSweepSummary, mut w: W) -> Result<()> {
    let io = |e| CliError::io(std::path::Path::new(HSWEEP_CSV), e);
    let mut header = vec!["h".to_string()];
    header.extend(summary.curves.iter().map(|c| format!("{}_accuracy", c.variant.name())));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, h) in summary.h_values.iter().enumerate() {
        let mut row = vec![h.to_string()];
        row.extend(summary.curves.iter().map(|c| c.median_accuracy[i].to_string()));
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
