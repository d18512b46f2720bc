//! Takagi-Sugeno-Kang fuzzy classifiers with Gaussian memberships and
//! interchangeable defuzzification (softmax, HTSK, LogTSK, L1/L2 normalized),
//! trained by mini-batch Adam, plus saturation diagnostics.

pub mod checkpoint;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gradcheck;
pub mod gradients;
pub mod init;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use data::{Dataset, Labeling, NormStats, Split, SplitSpec};
pub use diagnostics::{count_fired_rules, average_firing, DiagnosticsRecord, Percentiles, SweepSpec};
pub use error::{Result, TskError};
pub use gradients::{loss_and_grad, GradNorms, GradientSet, LossSpec};
pub use init::{init_model, InitSpec};
pub use model::{defuzzify, DefuzzVariant, FiringState, TskModel};
pub use pipeline::{run_experiment, ExperimentResult, ExperimentSpec};
pub use trainer::{evaluate, train, Evaluation, TrainConfig, TrainHook, TrainReport};
