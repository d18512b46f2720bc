//! Fixtures shared by the benchmarks in `benches/`.

use ndarray::Array2;
use tsk_core::gradcheck::{case_problem, GradCheckCase};
use tsk_core::{DefuzzVariant, TskModel};

/// Random model with a batch of standard-normal inputs and labels.
pub fn problem(variant: DefuzzVariant, dim: usize, rules: usize, batch: usize) -> (TskModel, Array2<f64>, Vec<usize>) {
    let case = GradCheckCase { variant, dim, rules, classes: 2, batch, seed: 17 };
    case_problem(&case).expect("valid benchmark sizes")
}
