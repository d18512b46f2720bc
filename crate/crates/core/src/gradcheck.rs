//! Randomized comparison of analytic gradients against finite differences.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gradients::{finite_diff_grad, loss_and_grad, max_relative_error, LossSpec, Stencil};
use crate::model::{DefuzzVariant, TskModel};
use crate::rng::{rng_from_seed, substream_indexed};

pub const CHECK_DIMS: [usize; 4] = [1, 5, 50, 500];
pub const CHECK_RULES: [usize; 3] = [1, 3, 10];
pub const CHECK_CLASSES: [usize; 2] = [2, 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub variant: DefuzzVariant,
    pub dim: usize,
    pub rules: usize,
    pub classes: usize,
    pub batch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckResult {
    pub case: GradCheckCase,
    pub num_params: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSettings {
    pub step: f64,
    pub stencil: Stencil,
    /// Denominator floor of the elementwise relative error.
    pub floor: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self { step: 1e-3, stencil: Stencil::FivePoint, floor: 1e-8 }
    }
}

/// `count` cases cycling through every variant, dimension, rule count and
/// class count (the cycle lengths are coprime-ish, so 60 cases see every
/// pairing of D with R and C), each with its own random seed.
pub fn random_cases(count: usize, seed: u64) -> Vec<GradCheckCase> {
    let mut rng = rng_from_seed(substream_indexed(seed, "gradcheck-cases", &[]));
    (0..count)
        .map(|i| GradCheckCase {
            variant: DefuzzVariant::ALL[i % DefuzzVariant::ALL.len()],
            dim: CHECK_DIMS[i % CHECK_DIMS.len()],
            rules: CHECK_RULES[i % CHECK_RULES.len()],
            classes: CHECK_CLASSES[(i / 12) % CHECK_CLASSES.len()],
            batch: rng.random_range(1..=4),
            seed: rng.random(),
        })
        .collect()
}

/// Random model and batch for a case: standard-normal inputs and centers,
/// He-scaled consequents, and widths `scale * U(0.7, 1.3)` where the
/// scale is `sqrt(D)` except for HTSK (which already divides by D), keeping
/// the log firing levels of order one.
pub fn case_problem(case: &GradCheckCase) -> Result<(TskModel, Array2<f64>, Vec<usize>)> {
    let mut rng = rng_from_seed(case.seed);
    let (r, d, c) = (case.rules, case.dim, case.classes);
    let scale = if case.variant == DefuzzVariant::Htsk { 1.0 } else { (d as f64).sqrt() };
    let centers = Array2::from_shape_simple_fn((r, d), || rng.sample::<f64, _>(StandardNormal));
    let widths = Array2::from_shape_simple_fn((r, d), || scale * rng.random_range(0.7..1.3));
    let he = (2.0 / (d as f64 + 1.0)).sqrt();
    let consequents = Array3::from_shape_simple_fn((r, d + 1, c), || he * rng.sample::<f64, _>(StandardNormal));
    let model = TskModel::new(centers, widths, consequents, case.variant)?;
    let xs = Array2::from_shape_simple_fn((case.batch, d), || rng.sample::<f64, _>(StandardNormal));
    let ys = (0..case.batch).map(|_| rng.random_range(0..c)).collect();
    Ok((model, xs, ys))
}

pub fn run_case(case: &GradCheckCase, settings: &GradCheckSettings) -> Result<GradCheckResult> {
    let (model, xs, ys) = case_problem(case)?;
    let loss = LossSpec::for_classes(case.classes);
    let (_, analytic) = loss_and_grad(&model, xs.view(), &ys, loss)?;
    let numeric = finite_diff_grad(&model, xs.view(), &ys, loss, settings.step, settings.stencil)?;
    Ok(GradCheckResult {
        case: *case,
        num_params: model.num_params(),
        max_relative_error: max_relative_error(&analytic, &numeric, settings.floor),
    })
}
