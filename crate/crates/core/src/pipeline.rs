//! Split, normalize, initialize, train and test in one call.

use serde::{Deserialize, Serialize};

use crate::data::{split, zscore_fit_transform, Dataset, NormStats, SplitSpec};
use crate::diagnostics::{DiagnosticsHook, DiagnosticsRecord, LandscapeRecord};
use crate::error::Result;
use crate::init::{init_model, InitSpec};
use crate::model::{DefuzzVariant, TskModel};
use crate::rng::substream;
use crate::trainer::{evaluate, train, Evaluation, TrainConfig, TrainHook, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub rules: usize,
    pub variant: DefuzzVariant,
    pub split: SplitSpec,
    pub init: InitSpec,
    pub train: TrainConfig,
    /// Record per-epoch firing statistics and gradient norms.
    pub diagnostics: bool,
    /// Probe the loss along each batch gradient with this step.
    pub landscape_eta: Option<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            rules: 10,
            variant: DefuzzVariant::Htsk,
            split: SplitSpec::default(),
            init: InitSpec::default(),
            train: TrainConfig::default(),
            diagnostics: false,
            landscape_eta: None,
        }
    }
}

impl ExperimentSpec {
    /// Derives the split, init and training seeds from one master seed.
    pub fn with_master_seed(mut self, seed: u64) -> Self {
        self.split.seed = substream(seed, "split");
        self.init.seed = substream(seed, "init");
        self.train.seed = substream(seed, "train");
        self
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Parameters of the best validation epoch.
    pub model: TskModel,
    pub norm_stats: NormStats,
    pub report: TrainReport,
    /// `None` when the split has no test samples.
    pub test: Option<Evaluation>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub landscape: Vec<LandscapeRecord>,
}

/// Runs the full protocol on `data`: split, z-score with training statistics,
/// k-means/He initialization, Adam training with early stopping, and test
/// evaluation of the best model.
pub fn run_experiment(data: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let parts = split(data, &spec.split)?;
    let (train_set, rest, norm_stats) = zscore_fit_transform(&parts.train, &[&parts.val, &parts.test])?;
    let [val_set, test_set]: [Dataset; 2] = rest.try_into().expect("two transformed sets");
    let model = init_model(&train_set, spec.rules, spec.variant, &spec.init)?;

    let mut hook = (spec.diagnostics || spec.landscape_eta.is_some()).then(|| {
        let h = DiagnosticsHook::new(train_set.features().to_owned());
        match spec.landscape_eta {
            Some(eta) => h.with_landscape(eta),
            None => h,
        }
    });
    let mut hooks: Vec<&mut dyn TrainHook> = Vec::new();
    if let Some(h) = hook.as_mut() {
        hooks.push(h);
    }
    let (model, report) = train(model, &train_set, &val_set, &spec.train, &mut hooks)?;
    let test = if test_set.is_empty() {
        None
    } else {
        Some(evaluate(&model, &test_set)?)
    };
    let (diagnostics, landscape) = match hook {
        Some(h) => (h.records, h.landscape),
        None => (Vec::new(), Vec::new()),
    };
    Ok(ExperimentResult { model, norm_stats, report, test, diagnostics, landscape })
}
