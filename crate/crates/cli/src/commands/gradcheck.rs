use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tsk_core::gradcheck::{random_cases, run_case, GradCheckResult, GradCheckSettings};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub cases: usize,
    pub tolerance: f64,
    pub settings: GradCheckSettings,
    pub max_relative_error: f64,
    pub worst: Option<GradCheckResult>,
    pub failures: usize,
}

impl GradCheckSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares analytic and finite-difference gradients on `count` random cases.
pub fn cmd_gradcheck(count: usize, seed: u64, tolerance: f64) -> Result<GradCheckSummary> {
    let settings = GradCheckSettings::default();
    let results: Vec<GradCheckResult> = random_cases(count, seed)
        .par_iter()
        .map(|case| run_case(case, &settings))
        .collect::<tsk_core::Result<_>>()?;
    let worst = results
        .iter()
        .copied()
        .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error));
    Ok(GradCheckSummary {
        cases: results.len(),
        tolerance,
        settings,
        max_relative_error: worst.map_or(0.0, |w| w.max_relative_error),
        worst,
        // NaN errors count as failures
        failures: results.iter().filter(|r| !(r.max_relative_error <= tolerance)).count(),
    })
}
