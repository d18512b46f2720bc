//! JSON model checkpoints.
//!
//! Parameters are stored as flat row-major arrays next to their shapes.
//! serde_json writes the shortest decimal that round-trips and is built with
//! exact float parsing, so finite doubles survive a save/load unchanged.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Result, TskError};
use crate::model::{DefuzzVariant, TskModel};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub variant: DefuzzVariant,
    pub num_rules: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    pub log_eps: f64,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub consequents: Vec<f64>,
    /// Statistics to apply to raw inputs before the model sees them.
    pub norm_stats: Option<NormStats>,
    /// Raw label value of each class index.
    pub class_values: Option<Vec<i64>>,
}

impl Checkpoint {
    pub fn from_model(
        model: &TskModel,
        norm_stats: Option<NormStats>,
        class_values: Option<Vec<i64>>,
    ) -> Result<Self> {
        if !model.params_finite() {
            return Err(TskError::Numeric {
                context: "checkpoint".into(),
                msg: "model has non-finite parameters".into(),
            });
        }
        let [m, s, b] = model.param_slices();
        Ok(Self {
            version: CHECKPOINT_VERSION,
            variant: model.variant(),
            num_rules: model.num_rules(),
            input_dim: model.input_dim(),
            num_classes: model.num_classes(),
            log_eps: model.log_eps(),
            centers: m.to_vec(),
            widths: s.to_vec(),
            consequents: b.to_vec(),
            norm_stats,
            class_values,
        })
    }

    pub fn to_model(&self) -> Result<TskModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(TskError::Schema(format!(
                "unsupported checkpoint version {}",
                self.version
            )));
        }
        let (r, d, c) = (self.num_rules, self.input_dim, self.num_classes);
        let bad = |what: &str, e: ndarray::ShapeError| TskError::Schema(format!("{what}: {e}"));
        let centers =
            Array2::from_shape_vec((r, d), self.centers.clone()).map_err(|e| bad("centers", e))?;
        let widths =
            Array2::from_shape_vec((r, d), self.widths.clone()).map_err(|e| bad("widths", e))?;
        let consequents = Array3::from_shape_vec((r, d + 1, c), self.consequents.clone())
            .map_err(|e| bad("consequents", e))?;
        if let Some(stats) = &self.norm_stats {
            if stats.dim() != d || stats.std.len() != d {
                return Err(TskError::Schema(format!(
                    "normalization stats cover {} features, model has {d}",
                    stats.dim()
                )));
            }
        }
        let mut model = TskModel::new(centers, widths, consequents, self.variant)?;
        model.set_log_eps(self.log_eps);
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| TskError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TskError::io(path, e))?;
        Self::from_json(&text)
    }
}
