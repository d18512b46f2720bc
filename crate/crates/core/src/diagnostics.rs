//! Saturation and landscape instrumentation: fired-rule counts, average
//! firing levels, gradient norms, loss probes along the gradient, and the
//! fired-rules sweep over (D, R, h).

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{synth_gaussian, Dataset, Labeling, SplitSpec};
use crate::error::{Result, TskError};
use crate::gradients::{batch_loss, loss_and_grad, GradNorms, GradientSet, LossSpec};
use crate::init::{init_model, InitSpec};
use crate::model::{defuzzify_into, DefuzzVariant, TskModel, FIRED_THRESHOLD};
use crate::rng::substream_indexed;
use crate::trainer::{train, BatchContext, EpochContext, TrainConfig, TrainHook};

/// Step fractions used by [`landscape_probe`]; 0 is the unperturbed loss.
pub const PROBE_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn check_dims(model: &TskModel, xs: ArrayView2<'_, f64>) -> Result<()> {
    if xs.ncols() != model.input_dim() {
        return Err(TskError::shape(
            format!("D={}", model.input_dim()),
            format!("D={}", xs.ncols()),
        ));
    }
    if xs.nrows() == 0 {
        return Err(TskError::Precondition("no samples to measure".into()));
    }
    Ok(())
}

/// Calls `f` with the normalized firing levels of every row of `xs`.
fn for_each_firing(model: &TskModel, xs: ArrayView2<'_, f64>, mut f: impl FnMut(&[f64])) -> Result<()> {
    check_dims(model, xs)?;
    let r = model.num_rules();
    let mut z = vec![0.0; r];
    let mut fbar = vec![0.0; r];
    let xs = xs.as_standard_layout();
    for (n, x) in xs.rows().into_iter().enumerate() {
        model.z_into(x.as_slice().expect("standard layout"), &mut z);
        defuzzify_into(&z, model.variant(), model.log_eps(), &mut fbar)
            .map_err(|e| e.with_numeric_context(&format!("sample {n}")))?;
        f(&fbar);
    }
    Ok(())
}

/// Mean over samples of the number of rules with normalized firing level above 1e-4.
pub fn count_fired_rules(model: &TskModel, xs: ArrayView2<'_, f64>) -> Result<f64> {
    let mut total = 0usize;
    for_each_firing(model, xs, |fbar| {
        total += fbar.iter().filter(|&&v| v > FIRED_THRESHOLD).count();
    })?;
    Ok(total as f64 / xs.nrows() as f64)
}

/// Per-rule mean of the normalized firing levels over the rows of `xs`.
pub fn average_firing(model: &TskModel, xs: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; model.num_rules()];
    for_each_firing(model, xs, |fbar| {
        for (a, f) in acc.iter_mut().zip(fbar) {
            *a += f;
        }
    })?;
    let n = xs.nrows() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Percentiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Percentiles {
    pub const LEVELS: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

    /// Linear-interpolation percentiles (the same convention as numpy's default).
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(TskError::Precondition("percentiles of an empty set".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let p = Self::LEVELS.map(|q| percentile_sorted(&v, q));
        Ok(Self { p5: p[0], p25: p[1], p50: p[2], p75: p[3], p95: p[4] })
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("p5", self.p5),
            ("p25", self.p25),
            ("p50", self.p50),
            ("p75", self.p75),
            ("p95", self.p95),
        ]
    }
}

fn percentile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Result<f64> {
    Ok(Percentiles::of(values)?.p50)
}

/// Evaluates `f(theta - s * eta * direction)` for every `s` in `grid`.
///
/// Non-finite or failed evaluations come back as `None`.
pub fn probe_direction<F>(theta: &[f64], direction: &[f64], eta: f64, grid: &[f64], mut f: F) -> Result<Vec<Option<f64>>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if theta.len() != direction.len() {
        return Err(TskError::shape(
            format!("{} direction entries", theta.len()),
            direction.len().to_string(),
        ));
    }
    if !(eta > 0.0) {
        return Err(TskError::Precondition(format!("probe step must be positive, got {eta}")));
    }
    let mut buf = theta.to_vec();
    Ok(grid
        .iter()
        .map(|&s| {
            for ((b, t), g) in buf.iter_mut().zip(theta).zip(direction) {
                *b = t - s * eta * g;
            }
            f(&buf).ok().filter(|v| v.is_finite())
        })
        .collect())
}

/// Losses on `(xs, ys)` along the negative gradient, `L(theta - s*eta*g)` for
/// `s` in [`PROBE_GRID`]. The model is moved in place and restored bit-exactly.
pub fn landscape_probe(
    model: &mut TskModel,
    xs: ArrayView2<'_, f64>,
    ys: &[usize],
    loss: LossSpec,
    eta: f64,
) -> Result<Vec<Option<f64>>> {
    let (_, grads) = loss_and_grad(model, xs, ys, loss)?;
    landscape_probe_with(model, &grads, xs, ys, loss, eta)
}

/// As [`landscape_probe`] with a precomputed gradient.
pub fn landscape_probe_with(
    model: &mut TskModel,
    grads: &GradientSet,
    xs: ArrayView2<'_, f64>,
    ys: &[usize],
    loss: LossSpec,
    eta: f64,
) -> Result<Vec<Option<f64>>> {
    if !(eta > 0.0) {
        return Err(TskError::Precondition(format!("probe step must be positive, got {eta}")));
    }
    let saved: Vec<Vec<f64>> = model.param_slices().iter().map(|s| s.to_vec()).collect();
    let mut out = Vec::with_capacity(PROBE_GRID.len());
    for &s in &PROBE_GRID {
        for ((p, orig), g) in model.param_slices_mut().into_iter().zip(&saved).zip(grads.slices()) {
            for i in 0..p.len() {
                p[i] = orig[i] - s * eta * g[i];
            }
        }
        out.push(batch_loss(model, xs, ys, loss).ok().filter(|v| v.is_finite()));
    }
    for (p, orig) in model.param_slices_mut().into_iter().zip(&saved) {
        p.copy_from_slice(orig);
    }
    Ok(out)
}

/// Per-batch spread of probe losses across runs that started from the same
/// parameters: the population standard deviation over runs at each grid
/// point, averaged over the nonzero grid points. Batches where any run has a
/// missing value give `None`.
pub fn landscape_variation(runs: &[Vec<Vec<Option<f64>>>]) -> Vec<Option<f64>> {
    let batches = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..batches)
        .map(|b| {
            let mut total = 0.0;
            let mut points = 0;
            for k in 1..PROBE_GRID.len() {
                let vals: Option<Vec<f64>> = runs.iter().map(|r| r[b].get(k).copied().flatten()).collect();
                let vals = vals?;
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                total += var.sqrt();
                points += 1;
            }
            Some(total / points as f64)
        })
        .collect()
}

/// Per-epoch diagnostics. Epoch 0 describes the initial model and has no gradient norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub epoch: usize,
    pub mean_fired_rules: f64,
    pub a_r: Vec<f64>,
    pub a_r_percentiles: Percentiles,
    /// Mean over the epoch's batches of the gradient L1 norms.
    pub grad_l1: Option<GradNorms>,
    pub train_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRecord {
    pub batch: usize,
    pub epoch: usize,
    pub losses: Vec<Option<f64>>,
}

/// Training hook that fills [`DiagnosticsRecord`]s, measuring firing on a fixed sample set.
pub struct DiagnosticsHook {
    probe_xs: Array2<f64>,
    landscape_eta: Option<f64>,
    scratch: Option<TskModel>,
    grad_sum: GradNorms,
    batches: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub landscape: Vec<LandscapeRecord>,
}

impl DiagnosticsHook {
    pub fn new(probe_xs: Array2<f64>) -> Self {
        Self {
            probe_xs,
            landscape_eta: None,
            scratch: None,
            grad_sum: GradNorms::default(),
            batches: 0,
            records: Vec::new(),
            landscape: Vec::new(),
        }
    }

    /// Also probe the loss along the gradient on every batch with step `eta`.
    pub fn with_landscape(mut self, eta: f64) -> Self {
        self.landscape_eta = Some(eta);
        self
    }

    fn firing_record(&self, model: &TskModel, epoch: usize) -> Result<DiagnosticsRecord> {
        let xs = self.probe_xs.view();
        let a_r = average_firing(model, xs)?;
        Ok(DiagnosticsRecord {
            epoch,
            mean_fired_rules: count_fired_rules(model, xs)?,
            a_r_percentiles: Percentiles::of(&a_r)?,
            a_r,
            grad_l1: None,
            train_loss: None,
            val_accuracy: None,
            val_loss: None,
        })
    }
}

impl TrainHook for DiagnosticsHook {
    fn on_train_start(&mut self, model: &TskModel) -> Result<()> {
        let rec = self.firing_record(model, 0)?;
        self.records.push(rec);
        Ok(())
    }

    fn on_batch(&mut self, ctx: &BatchContext<'_>) -> Result<()> {
        let n = ctx.grads.l1_norms();
        self.grad_sum.m += n.m;
        self.grad_sum.sigma += n.sigma;
        self.grad_sum.b += n.b;
        self.batches += 1;
        if let Some(eta) = self.landscape_eta {
            let scratch = self.scratch.get_or_insert_with(|| ctx.model.clone());
            for (dst, src) in scratch.param_slices_mut().into_iter().zip(ctx.model.param_slices()) {
                dst.copy_from_slice(src);
            }
            let losses = landscape_probe_with(scratch, ctx.grads, ctx.batch_x, ctx.batch_y, ctx.loss_spec, eta)?;
            self.landscape.push(LandscapeRecord { batch: ctx.batch, epoch: ctx.epoch, losses });
        }
        Ok(())
    }

    fn on_epoch_end(&mut self, ctx: &EpochContext<'_>) -> Result<()> {
        let mut rec = self.firing_record(ctx.model, ctx.epoch)?;
        let k = self.batches.max(1) as f64;
        rec.grad_l1 = Some(GradNorms {
            m: self.grad_sum.m / k,
            sigma: self.grad_sum.sigma / k,
            b: self.grad_sum.b / k,
        });
        rec.train_loss = Some(ctx.record.train_loss);
        rec.val_accuracy = Some(ctx.record.val_accuracy);
        rec.val_loss = Some(ctx.record.val_loss);
        self.records.push(rec);
        self.grad_sum = GradNorms::default();
        self.batches = 0;
        Ok(())
    }
}

/// Grid of the fired-rules sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dims: Vec<usize>,
    pub rule_counts: Vec<usize>,
    pub h_values: Vec<f64>,
    /// Epochs at which firing is measured; 0 is the initialized model.
    pub epochs_at: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    /// Samples in each synthetic dataset.
    pub samples: usize,
    pub classes: usize,
    /// Template for initialization; `h` and `seed` are set per grid point.
    pub init: InitSpec,
    /// Template for training between measurement epochs; `seed` is set per
    /// grid point and early stopping is disabled.
    pub train: TrainConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            dims: vec![5, 10, 50, 100, 500, 1000, 2000],
            rule_counts: vec![5, 20, 50, 100, 200],
            h_values: vec![1.0, 5.0, 10.0, 50.0],
            epochs_at: vec![0, 30],
            repeats: 10,
            seed: 0,
            samples: 1000,
            classes: 2,
            init: InitSpec { kmeans_restarts: 1, ..InitSpec::default() },
            train: TrainConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty()
            || self.rule_counts.is_empty()
            || self.h_values.is_empty()
            || self.epochs_at.is_empty()
        {
            return Err(TskError::Config("sweep lists must be nonempty".into()));
        }
        if self.repeats == 0 || self.classes == 0 {
            return Err(TskError::Config("repeats and classes must be positive".into()));
        }
        if self.dims.contains(&0) || self.rule_counts.contains(&0) {
            return Err(TskError::Config("dims and rule counts must be positive".into()));
        }
        if let Some(&r) = self.rule_counts.iter().max() {
            let n_train = sweep_split_spec(0).sizes(self.samples)?.0;
            let needed = if self.max_epoch() > 0 { n_train } else { self.samples };
            if needed < r {
                return Err(TskError::Config(format!(
                    "{} sweep samples cannot seed {r} rules",
                    self.samples
                )));
            }
        }
        for &h in &self.h_values {
            InitSpec { h, ..self.init }.validate()?;
        }
        self.train.validate()
    }

    fn max_epoch(&self) -> usize {
        self.epochs_at.iter().copied().max().unwrap_or(0)
    }

    /// Number of (D, R, h, repeat) runs.
    pub fn num_runs(&self) -> usize {
        self.dims.len() * self.rule_counts.len() * self.h_values.len() * self.repeats
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub variant: DefuzzVariant,
    pub dim: usize,
    pub rules: usize,
    pub h: f64,
    pub epoch: usize,
    pub repeat: usize,
    pub mean_fired_rules: f64,
    pub a_r_percentiles: Percentiles,
}

struct SweepHook {
    epochs_at: Vec<usize>,
    xs: Array2<f64>,
    out: Vec<(usize, f64, Percentiles)>,
}

impl SweepHook {
    fn measure(&mut self, model: &TskModel, epoch: usize) -> Result<()> {
        if self.epochs_at.contains(&epoch) {
            let a_r = average_firing(model, self.xs.view())?;
            let fired = count_fired_rules(model, self.xs.view())?;
            self.out.push((epoch, fired, Percentiles::of(&a_r)?));
        }
        Ok(())
    }
}

impl TrainHook for SweepHook {
    fn on_train_start(&mut self, model: &TskModel) -> Result<()> {
        self.measure(model, 0)
    }

    fn on_epoch_end(&mut self, ctx: &EpochContext<'_>) -> Result<()> {
        self.measure(ctx.model, ctx.epoch)
    }
}

fn sweep_split_spec(seed: u64) -> SplitSpec {
    SplitSpec {
        train_fraction: 1.0,
        seed,
        allow_empty_test: true,
        ..SplitSpec::default()
    }
}

/// Synthetic data for one sweep run. Depends on (seed, D, repeat) only, so
/// every R, h and variant sees the same samples.
pub fn sweep_dataset(spec: &SweepSpec, dim: usize, repeat: usize) -> Result<Dataset> {
    let seed = substream_indexed(spec.seed, "sweep-data", &[dim as u64, repeat as u64]);
    synth_gaussian(spec.samples, dim, spec.classes, seed, Labeling::Random)
}

/// Initialization for one sweep run. Shared across h and variants.
pub fn sweep_init_spec(spec: &SweepSpec, dim: usize, rules: usize, h: f64, repeat: usize) -> InitSpec {
    InitSpec {
        h,
        seed: substream_indexed(spec.seed, "sweep-init", &[dim as u64, rules as u64, repeat as u64]),
        ..spec.init
    }
}

fn sweep_point(
    spec: &SweepSpec,
    variant: DefuzzVariant,
    dim: usize,
    rules: usize,
    h: f64,
    repeat: usize,
) -> Result<Vec<SweepRecord>> {
    let data = sweep_dataset(spec, dim, repeat)?;
    let init = sweep_init_spec(spec, dim, rules, h, repeat);
    let max_epoch = spec.max_epoch();
    let mut hook = SweepHook {
        epochs_at: spec.epochs_at.clone(),
        xs: data.features().to_owned(),
        out: Vec::new(),
    };
    if max_epoch == 0 {
        let model = init_model(&data, rules, variant, &init)?;
        hook.measure(&model, 0)?;
    } else {
        // train on 90% and validate on the rest; firing is measured on all samples
        let split_seed = substream_indexed(spec.seed, "sweep-split", &[dim as u64, repeat as u64]);
        let parts = crate::data::split(&data, &sweep_split_spec(split_seed))?;
        let model = init_model(&parts.train, rules, variant, &init)?;
        let cfg = TrainConfig {
            max_epochs: max_epoch,
            patience: max_epoch,
            seed: substream_indexed(spec.seed, "sweep-train", &[dim as u64, rules as u64, repeat as u64]),
            ..spec.train
        };
        train(model, &parts.train, &parts.val, &cfg, &mut [&mut hook])?;
    }
    Ok(hook
        .out
        .into_iter()
        .map(|(epoch, fired, pct)| SweepRecord {
            variant,
            dim,
            rules,
            h,
            epoch,
            repeat,
            mean_fired_rules: fired,
            a_r_percentiles: pct,
        })
        .collect())
}

/// Measures fired rules for every (D, R, h, repeat) on random-label data.
///
/// Grid points run in parallel on the current rayon pool; the output order
/// is fixed (D, R, h, repeat, epoch) regardless of scheduling.
pub fn saturation_sweep(spec: &SweepSpec, variant: DefuzzVariant) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.num_runs());
    for &d in &spec.dims {
        for &r in &spec.rule_counts {
            for &h in &spec.h_values {
                for rep in 0..spec.repeats {
                    points.push((d, r, h, rep));
                }
            }
        }
    }
    let shards: Vec<Vec<SweepRecord>> = points
        .par_iter()
        .map(|&(d, r, h, rep)| {
            sweep_point(spec, variant, d, r, h, rep)
                .map_err(|e| e.with_numeric_context(&format!("sweep D={d} R={r} h={h} repeat={rep}")))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<SweepRecord> = shards.into_iter().flatten().collect();
    // epochs_at order, not measurement order
    out.sort_by_key(|rec| {
        let pos = spec.epochs_at.iter().position(|&e| e == rec.epoch).unwrap_or(usize::MAX);
        (
            spec.dims.iter().position(|&d| d == rec.dim),
            spec.rule_counts.iter().position(|&r| r == rec.rules),
            spec.h_values.iter().position(|&h| h == rec.h),
            rec.repeat,
            pos,
        )
    });
    Ok(out)
}

/// Mean over repeats, keyed by (D, R, h, epoch) in sweep order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub variant: DefuzzVariant,
    pub dim: usize,
    pub rules: usize,
    pub h: f64,
    pub epoch: usize,
    pub repeats: usize,
    pub mean_fired_rules: f64,
    pub min_fired_rules: f64,
    pub max_fired_rules: f64,
    /// Repeat-averaged A_r percentile bands.
    pub a_r_percentiles: Percentiles,
}

pub fn summarize_sweep(records: &[SweepRecord]) -> Vec<SweepSummary> {
    let mut out: Vec<SweepSummary> = Vec::new();
    for rec in records {
        let idx = out.iter().position(|s| {
            s.variant == rec.variant && s.dim == rec.dim && s.rules == rec.rules && s.h == rec.h && s.epoch == rec.epoch
        });
        match idx {
            None => {
                out.push(SweepSummary {
                    variant: rec.variant,
                    dim: rec.dim,
                    rules: rec.rules,
                    h: rec.h,
                    epoch: rec.epoch,
                    repeats: 1,
                    mean_fired_rules: rec.mean_fired_rules,
                    min_fired_rules: rec.mean_fired_rules,
                    max_fired_rules: rec.mean_fired_rules,
                    a_r_percentiles: rec.a_r_percentiles,
                });
            }
            Some(i) => {
                let s = &mut out[i];
                s.repeats += 1;
                s.mean_fired_rules += rec.mean_fired_rules;
                s.min_fired_rules = s.min_fired_rules.min(rec.mean_fired_rules);
                s.max_fired_rules = s.max_fired_rules.max(rec.mean_fired_rules);
                let p = &mut s.a_r_percentiles;
                let q = rec.a_r_percentiles;
                p.p5 += q.p5;
                p.p25 += q.p25;
                p.p50 += q.p50;
                p.p75 += q.p75;
                p.p95 += q.p95;
            }
        }
    }
    for s in &mut out {
        let k = s.repeats as f64;
        s.mean_fired_rules /= k;
        let p = &mut s.a_r_percentiles;
        p.p5 /= k;
        p.p25 /= k;
        p.p50 /= k;
        p.p75 /= k;
        p.p95 /= k;
    }
    out
}

/// Looks up the repeat-averaged fired-rule count at one grid point.
pub fn summary_value(summary: &[SweepSummary], dim: usize, rules: usize, h: f64, epoch: usize) -> Option<f64> {
    summary
        .iter()
        .find(|s| s.dim == dim && s.rules == rules && s.h == h && s.epoch == epoch)
        .map(|s| s.mean_fired_rules)
}

/// One row of the long-format metrics table shared by train and sweep outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub variant: String,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "R")]
    pub rules: usize,
    pub h: f64,
    pub epoch: usize,
    pub repeat: usize,
    pub metric: String,
    pub value: f64,
}

/// Header of the tidy metrics CSV.
pub const TIDY_HEADER: [&str; 8] = ["variant", "D", "R", "h", "epoch", "repeat", "metric", "value"];

pub fn sweep_tidy_rows(records: &[SweepRecord]) -> Vec<TidyRow> {
    records
        .iter()
        .map(|r| TidyRow {
            variant: r.variant.name().to_string(),
            dim: r.dim,
            rules: r.rules,
            h: r.h,
            epoch: r.epoch,
            repeat: r.repeat,
            metric: "mean_fired_rules".into(),
            value: r.mean_fired_rules,
        })
        .collect()
}

/// Flattens training diagnostics into tidy rows for a single run.
pub fn training_tidy_rows(
    records: &[DiagnosticsRecord],
    variant: DefuzzVariant,
    dim: usize,
    rules: usize,
    h: f64,
    repeat: usize,
) -> Vec<TidyRow> {
    let mut out = Vec::new();
    for rec in records {
        let mut push = |metric: &str, value: f64| {
            out.push(TidyRow {
                variant: variant.name().to_string(),
                dim,
                rules,
                h,
                epoch: rec.epoch,
                repeat,
                metric: metric.to_string(),
                value,
            })
        };
        push("mean_fired_rules", rec.mean_fired_rules);
        for (name, v) in rec.a_r_percentiles.named() {
            push(&format!("a_r_{name}"), v);
        }
        if let Some(g) = rec.grad_l1 {
            push("grad_l1_m", g.m);
            push("grad_l1_sigma", g.sigma);
            push("grad_l1_b", g.b);
        }
        if let Some(v) = rec.train_loss {
            push("train_loss", v);
        }
        if let Some(v) = rec.val_accuracy {
            push("val_accuracy", v);
        }
        if let Some(v) = rec.val_loss {
            push("val_loss", v);
        }
    }
    out
}

pub fn write_tidy_csv<W: Write>(rows: &[TidyRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let csv_err = |e: csv::Error| TskError::Schema(format!("writing CSV: {e}"));
    w.write_record(TIDY_HEADER).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| TskError::Schema(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Header of the per-batch landscape CSV.
pub const LANDSCAPE_HEADER: [&str; 7] = ["variant", "D", "R", "h", "batch", "metric", "value"];

/// Writes probe losses as `loss_s<fraction>` metrics; missing values are skipped.
pub fn write_landscape_csv<W: Write>(
    records: &[LandscapeRecord],
    variant: DefuzzVariant,
    dim: usize,
    rules: usize,
    h: f64,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| TskError::Schema(format!("writing CSV: {e}"));
    w.write_record(LANDSCAPE_HEADER).map_err(csv_err)?;
    for rec in records {
        for (s, loss) in PROBE_GRID.iter().zip(&rec.losses) {
            if let Some(v) = loss {
                w.write_record([
                    variant.name().to_string(),
                    dim.to_string(),
                    rules.to_string(),
                    h.to_string(),
                    rec.batch.to_string(),
                    format!("loss_s{s:.2}"),
                    v.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| TskError::Schema(format!("writing CSV: {e}")))?;
    Ok(())
}
