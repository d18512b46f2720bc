//! Run configuration: one TOML file with a section per module, plus
//! `--set section.key=value` overrides applied before deserialization.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsk_core::data::{load_dense, load_sparse_index_value, synth_gaussian, DenseFormat, LabelColumn};
use tsk_core::diagnostics::SweepSpec;
use tsk_core::gradients::LossSpec;
use tsk_core::rng::substream;
use tsk_core::{Dataset, DefuzzVariant, ExperimentSpec, InitSpec, Labeling, SplitSpec, TrainConfig};

use crate::error::{CliError, Result};

/// File name of the resolved configuration inside every output directory.
pub const RESOLVED_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stage uses a named sub-stream of it.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for parallel stages (all cores when unset).
    pub jobs: Option<usize>,
    pub variant: DefuzzVariant,
    pub rules: usize,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub init: InitConfig,
    pub train: TrainSection,
    pub diagnostics: DiagnosticsConfig,
    pub sweep: SweepConfig,
    pub hsweep: HSweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/latest"),
            jobs: None,
            variant: DefuzzVariant::Htsk,
            rules: 10,
            data: DataConfig::default(),
            split: SplitConfig::default(),
            init: InitConfig::default(),
            train: TrainSection::default(),
            diagnostics: DiagnosticsConfig::default(),
            sweep: SweepConfig::default(),
            hsweep: HSweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    #[default]
    Csv,
    CsvNoHeader,
    /// `label idx:val ...` lines.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthLabels {
    #[default]
    Separable,
    Random,
}

/// Data source: a file when `path` is set, otherwise generated Gaussian data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub format: DataFormat,
    /// Label column by header name or 0-based index; the last column when unset.
    pub label_column: Option<String>,
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    pub labels: SynthLabels,
    /// Per-feature mean shift of each class block for separable labels.
    pub shift: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            format: DataFormat::Csv,
            label_column: None,
            samples: 2000,
            dim: 500,
            classes: 2,
            labels: SynthLabels::Separable,
            shift: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub allow_empty_test: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            train_fraction: s.train_fraction,
            validation_fraction: s.validation_fraction_of_train,
            allow_empty_test: s.allow_empty_test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub h: f64,
    pub sigma_spread: f64,
    pub kmeans_iters: usize,
    pub kmeans_restarts: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        let s = InitSpec::default();
        Self {
            h: s.h,
            sigma_spread: s.sigma_spread,
            kmeans_iters: s.kmeans_iters,
            kmeans_restarts: s.kmeans_restarts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Per-epoch fired rules, A_r percentiles and gradient norms.
    pub enabled: bool,
    /// Step of the per-batch loss probe along the gradient; off when unset.
    pub landscape_eta: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { enabled: true, landscape_eta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variants: Vec<DefuzzVariant>,
    pub dims: Vec<usize>,
    pub rule_counts: Vec<usize>,
    pub h_values: Vec<f64>,
    pub epochs_at: Vec<usize>,
    pub repeats: usize,
    pub samples: usize,
    pub classes: usize,
    pub kmeans_restarts: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let s = SweepSpec::default();
        Self {
            variants: vec![DefuzzVariant::Vanilla, DefuzzVariant::Htsk, DefuzzVariant::LogTsk],
            dims: s.dims,
            rule_counts: s.rule_counts,
            h_values: s.h_values,
            epochs_at: s.epochs_at,
            repeats: s.repeats,
            samples: s.samples,
            classes: s.classes,
            kmeans_restarts: s.init.kmeans_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HSweepConfig {
    pub variants: Vec<DefuzzVariant>,
    pub h_values: Vec<f64>,
    pub repeats: usize,
}

impl Default for HSweepConfig {
    fn default() -> Self {
        Self {
            variants: vec![DefuzzVariant::Htsk, DefuzzVariant::LogTsk],
            h_values: vec![0.1, 0.5, 1.0, 5.0, 10.0],
            repeats: 10,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides, and validates.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rules == 0 {
            return Err(CliError::Config("rules must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be positive".into()));
        }
        if self.data.path.is_none() && (self.data.samples == 0 || self.data.dim == 0 || self.data.classes == 0) {
            return Err(CliError::Config("synthetic samples, dim and classes must be positive".into()));
        }
        self.experiment_spec(self.variant, self.init.h, 2, self.seed).init.validate()?;
        self.train_config(2).validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Writes the resolved config into `dir`, creating it if needed.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(RESOLVED_CONFIG);
        fs::write(&path, self.to_toml()?).map_err(|e| CliError::io(&path, e))
    }

    /// Loads the configured dataset. Synthetic data is drawn from the
    /// "data" sub-stream of `master_seed`.
    pub fn load_data(&self, master_seed: u64) -> Result<Dataset> {
        let d = &self.data;
        let Some(path) = &d.path else {
            let labeling = match d.labels {
                SynthLabels::Separable => Labeling::ClusterSeparable { shift: d.shift },
                SynthLabels::Random => Labeling::Random,
            };
            return Ok(synth_gaussian(d.samples, d.dim, d.classes, substream(master_seed, "data"), labeling)?);
        };
        let label = match &d.label_column {
            None => LabelColumn::Last,
            Some(s) => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Named(s.clone()),
            },
        };
        let ds = match d.format {
            DataFormat::Csv => load_dense(path, DenseFormat::CsvWithHeader, &label)?,
            DataFormat::CsvNoHeader => load_dense(path, DenseFormat::CsvNoHeader, &label)?,
            DataFormat::Sparse => load_sparse_index_value(path)?,
        };
        Ok(ds)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            validation_fraction_of_train: self.split.validation_fraction,
            seed: 0,
            allow_empty_test: self.split.allow_empty_test,
        }
    }

    pub fn train_config(&self, classes: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            seed: 0,
            loss: LossSpec::for_classes(classes),
        }
    }

    /// The training protocol for one run, seeded from `master_seed`.
    pub fn experiment_spec(&self, variant: DefuzzVariant, h: f64, classes: usize, master_seed: u64) -> ExperimentSpec {
        let i = &self.init;
        ExperimentSpec {
            rules: self.rules,
            variant,
            split: self.split_spec(),
            init: InitSpec {
                h,
                sigma_spread: i.sigma_spread,
                kmeans_iters: i.kmeans_iters,
                kmeans_restarts: i.kmeans_restarts,
                seed: 0,
            },
            train: self.train_config(classes),
            diagnostics: self.diagnostics.enabled,
            landscape_eta: self.diagnostics.landscape_eta,
        }
        .with_master_seed(master_seed)
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let s = &self.sweep;
        let base = self.experiment_spec(self.variant, self.init.h, s.classes, self.seed);
        SweepSpec {
            dims: s.dims.clone(),
            rule_counts: s.rule_counts.clone(),
            h_values: s.h_values.clone(),
            epochs_at: s.epochs_at.clone(),
            repeats: s.repeats,
            seed: self.seed,
            samples: s.samples,
            classes: s.classes,
            init: InitSpec { kmeans_restarts: s.kmeans_restarts, ..base.init },
            train: base.train,
        }
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML literal
/// and falls back to a plain string (so `variant=htsk` works unquoted).
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for section in sections {
        let entry = cur
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{section} in {key:?} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
