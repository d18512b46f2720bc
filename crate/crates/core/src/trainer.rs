//! Mini-batch training with Adam and validation-based early stopping.

use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, TskError};
use crate::gradients::{loss_and_grad, GradientSet, LossSpec};
use crate::model::TskModel;
use crate::rng::rng_from_seed;

/// Batches larger than this many samples are replaced on small training sets.
pub const SMALL_SET_BATCH: usize = 60;

/// Batch size actually used: the requested size, unless it exceeds the
/// training set, in which case `min(n_train, 60)`.
pub fn effective_batch_size(requested: usize, n_train: usize) -> usize {
    if requested <= n_train {
        requested
    } else {
        n_train.min(SMALL_SET_BATCH)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without improvement (counted from the best epoch) before stopping.
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub loss: LossSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 512,
            max_epochs: 200,
            patience: 20,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            loss: LossSpec::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.adam_beta1) || !unit(self.adam_beta2) {
            return Err(TskError::Config("Adam betas must lie in (0, 1)".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TskError::Config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.adam_eps > 0.0) {
            return Err(TskError::Config("adam_eps must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(TskError::Config(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Adam moment estimates, one buffer per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: [Vec<f64>; 3],
    second: [Vec<f64>; 3],
    step: u64,
}

impl AdamState {
    pub fn new(model: &TskModel) -> Self {
        let sizes = model.param_slices().map(|s| s.len());
        Self {
            first: sizes.map(|n| vec![0.0; n]),
            second: sizes.map(|n| vec![0.0; n]),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `model` along `grads`.
    pub fn apply(&mut self, model: &mut TskModel, grads: &GradientSet, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.adam_beta1.powi(t);
        let c2 = 1.0 - cfg.adam_beta2.powi(t);
        let params = model.param_slices_mut();
        for (k, (p, g)) in params.into_iter().zip(grads.slices()).enumerate() {
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean of the batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_val_loss: f64,
    /// True when the returned parameters are a snapshot from before the last epoch.
    pub restored_best: bool,
    pub stopped_early: bool,
    pub batch_size: usize,
    /// Not serialized, so reports from identical runs compare byte-for-byte.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub n_samples: usize,
}

/// Information passed to hooks after each optimizer step's gradient is known
/// (the update has not been applied yet).
pub struct BatchContext<'a> {
    pub epoch: usize,
    /// Global batch counter across epochs, starting at 0.
    pub batch: usize,
    pub model: &'a TskModel,
    pub batch_x: ndarray::ArrayView2<'a, f64>,
    pub batch_y: &'a [usize],
    pub loss: f64,
    pub grads: &'a GradientSet,
    pub loss_spec: LossSpec,
}

pub struct EpochContext<'a> {
    pub epoch: usize,
    /// Current parameters, not the best snapshot.
    pub model: &'a TskModel,
    pub record: &'a EpochRecord,
}

/// Diagnostic callback invoked synchronously on the training thread.
pub trait TrainHook {
    /// Called once with the initial model (epoch 0).
    fn on_train_start(&mut self, _model: &TskModel) -> Result<()> {
        Ok(())
    }

    fn on_batch(&mut self, _ctx: &BatchContext<'_>) -> Result<()> {
        Ok(())
    }

    fn on_epoch_end(&mut self, _ctx: &EpochContext<'_>) -> Result<()> {
        Ok(())
    }
}

/// Accuracy and mean loss of `model` on `ds`.
pub fn evaluate(model: &TskModel, ds: &Dataset) -> Result<Evaluation> {
    evaluate_with(model, ds, LossSpec::for_classes(model.num_classes()))
}

pub fn evaluate_with(model: &TskModel, ds: &Dataset, loss: LossSpec) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(TskError::Precondition("cannot evaluate on an empty dataset".into()));
    }
    if ds.dim() != model.input_dim() {
        return Err(TskError::shape(
            format!("D={}", model.input_dim()),
            format!("D={}", ds.dim()),
        ));
    }
    if ds.num_classes() > model.num_classes() && loss == LossSpec::CrossEntropy {
        return Err(TskError::shape(
            format!("C={}", model.num_classes()),
            format!("C={}", ds.num_classes()),
        ));
    }
    let (pred, scores) = model.predict_batch(ds.features())?;
    let correct = pred.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
    let mut g = vec![0.0; model.num_classes()];
    let mut total = 0.0;
    for (row, &y) in scores.rows().into_iter().zip(ds.labels()) {
        total += loss.sample_loss(row.as_slice().expect("standard layout"), y, &mut g);
    }
    let n = ds.n_samples();
    Ok(Evaluation {
        accuracy: correct as f64 / n as f64,
        mean_loss: total / n as f64,
        n_samples: n,
    })
}

fn improves(acc: f64, loss: f64, best_acc: f64, best_loss: f64) -> bool {
    acc > best_acc || (acc == best_acc && loss < best_loss)
}

/// Trains `model` and returns the parameters of the best validation epoch.
///
/// Batches are drawn from a fresh shuffle each epoch (the last, possibly
/// short, batch is kept). After every epoch the validation set is scored;
/// an epoch is better when its accuracy is higher, or equal with lower loss.
/// Training stops after `max_epochs` or once `patience` epochs have passed
/// since the best one.
pub fn train(
    model: TskModel,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    hooks: &mut [&mut dyn TrainHook],
) -> Result<(TskModel, TrainReport)> {
    cfg.validate()?;
    cfg.loss.validate(model.num_classes())?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TskError::Precondition(
            "training and validation sets must be nonempty".into(),
        ));
    }
    for ds in [train_set, val_set] {
        if ds.dim() != model.input_dim() {
            return Err(TskError::shape(
                format!("D={}", model.input_dim()),
                format!("D={}", ds.dim()),
            ));
        }
    }

    let start = Instant::now();
    let mut model = model;
    let mut adam = AdamState::new(&model);
    let mut rng = rng_from_seed(cfg.seed);
    let n = train_set.n_samples();
    let batch_size = effective_batch_size(cfg.batch_size, n);
    let mut order: Vec<usize> = (0..n).collect();

    for h in hooks.iter_mut() {
        h.on_train_start(&model)?;
    }

    let mut best: Option<(TskModel, EpochRecord)> = None;
    let mut epochs = Vec::new();
    let mut global_batch = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(batch_size).enumerate() {
            let bx = train_set.features().select(Axis(0), idx);
            let by: Vec<usize> = idx.iter().map(|&i| train_set.labels()[i]).collect();
            let (loss, grads) = loss_and_grad(&model, bx.view(), &by, cfg.loss)
                .map_err(|e| e.with_numeric_context(&format!("epoch {epoch}, batch {b}")))?;
            let ctx = BatchContext {
                epoch,
                batch: global_batch,
                model: &model,
                batch_x: bx.view(),
                batch_y: &by,
                loss,
                grads: &grads,
                loss_spec: cfg.loss,
            };
            for h in hooks.iter_mut() {
                h.on_batch(&ctx)?;
            }
            adam.apply(&mut model, &grads, cfg);
            loss_sum += loss;
            batches += 1;
            global_batch += 1;
        }
        if !model.params_finite() {
            return Err(TskError::Numeric {
                context: format!("epoch {epoch}"),
                msg: "parameters became non-finite".into(),
            });
        }

        let val = evaluate_with(&model, val_set, cfg.loss)
            .map_err(|e| e.with_numeric_context(&format!("epoch {epoch}, validation")))?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_accuracy: val.accuracy,
            val_loss: val.mean_loss,
        };
        epochs.push(record);
        for h in hooks.iter_mut() {
            h.on_epoch_end(&EpochContext {
                epoch,
                model: &model,
                record: &record,
            })?;
        }

        let better = match &best {
            None => true,
            Some((_, b)) => improves(record.val_accuracy, record.val_loss, b.val_accuracy, b.val_loss),
        };
        if better {
            best = Some((model.clone(), record));
        }
        let best_epoch = best.as_ref().map_or(epoch, |(_, b)| b.epoch);
        if epoch - best_epoch >= cfg.patience && epoch < cfg.max_epochs {
            stopped_early = true;
            break;
        }
    }

    let last_epoch = epochs.last().map_or(0, |e| e.epoch);
    let (best_model, best_record) = best.expect("at least one epoch ran");
    let report = TrainReport {
        epochs,
        best_epoch: best_record.epoch,
        best_val_accuracy: best_record.val_accuracy,
        best_val_loss: best_record.val_loss,
        restored_best: best_record.epoch != last_epoch,
        stopped_early,
        batch_size,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((best_model, report))
}
