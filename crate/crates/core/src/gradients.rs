//! Loss functions, analytic gradients and a central-difference oracle.
//!
//! For one sample with output gradient `g = dL/dy`, every rule contributes
//! `s_r = y_r . g`. The gradient flows into the log firing levels as
//!
//! * softmax (vanilla, HTSK): `dL/dz_r = fbar_r (s_r - sbar)`
//! * LogTSK: `dL/dz_r = fbar_r g_r (s_r - sbar)` with `g_r = 1 / (-z_r + eps)`
//! * L1: `dL/dz_r = (s_r - sign(z_r) sum_i s_i fbar_i) / ||z||_1`
//! * L2: `dL/dz_r = (s_r - fbar_r sum_i s_i fbar_i) / ||z||_2`
//!
//! where `sbar = sum_i fbar_i s_i`, and then into the antecedents through
//! `dz_r/dm_rd = k (x_d - m_rd) / w^2` and `dz_r/dw_rd = k (x_d - m_rd)^2 / w^3`
//! with `k = 1/D` for HTSK and 1 otherwise.

use ndarray::{Array2, Array3, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};
use crate::model::{
    defuzzify_into, effective_width, effective_width_derivative, DefuzzVariant, TskModel,
};

/// Training loss over the C model outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossSpec {
    /// Softmax cross-entropy on the outputs as logits; needs C >= 2.
    CrossEntropy,
    /// Squared error of the single output against the label value; needs C = 1.
    MeanSquaredError,
}

impl LossSpec {
    /// The natural loss for a model with `classes` outputs.
    pub fn for_classes(classes: usize) -> Self {
        if classes == 1 {
            LossSpec::MeanSquaredError
        } else {
            LossSpec::CrossEntropy
        }
    }

    pub fn validate(self, classes: usize) -> Result<()> {
        match self {
            LossSpec::CrossEntropy if classes < 2 => Err(TskError::Config(
                "cross-entropy needs at least two outputs".into(),
            )),
            LossSpec::MeanSquaredError if classes != 1 => Err(TskError::Config(format!(
                "mean squared error needs a single output, model has {classes}"
            ))),
            _ => Ok(()),
        }
    }

    /// Loss of one output vector and its gradient written into `grad`.
    pub fn sample_loss(self, output: &[f64], label: usize, grad: &mut [f64]) -> f64 {
        match self {
            LossSpec::CrossEntropy => {
                let max = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (g, &o) in grad.iter_mut().zip(output) {
                    *g = (o - max).exp();
                    sum += *g;
                }
                for g in grad.iter_mut() {
                    *g /= sum;
                }
                grad[label] -= 1.0;
                sum.ln() + max - output[label]
            }
            LossSpec::MeanSquaredError => {
                let diff = output[0] - label as f64;
                grad[0] = 2.0 * diff;
                diff * diff
            }
        }
    }
}

/// Gradients of the loss with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_centers: Array2<f64>,
    pub d_widths: Array2<f64>,
    pub d_consequents: Array3<f64>,
}

/// Sums of absolute gradient values per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradNorms {
    pub m: f64,
    pub sigma: f64,
    pub b: f64,
}

impl GradientSet {
    pub fn zeros_like(model: &TskModel) -> Self {
        let (r, d, c) = (model.num_rules(), model.input_dim(), model.num_classes());
        Self {
            d_centers: Array2::zeros((r, d)),
            d_widths: Array2::zeros((r, d)),
            d_consequents: Array3::zeros((r, d + 1, c)),
        }
    }

    /// Groups as flat slices, in the same order as [`TskModel::param_slices`].
    pub fn slices(&self) -> [&[f64]; 3] {
        [
            self.d_centers.as_slice().expect("standard layout"),
            self.d_widths.as_slice().expect("standard layout"),
            self.d_consequents.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.d_centers.as_slice_mut().expect("standard layout"),
            self.d_widths.as_slice_mut().expect("standard layout"),
            self.d_consequents.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn l1_norms(&self) -> GradNorms {
        grad_l1_norms(self)
    }

    fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }
}

pub fn grad_l1_norms(grads: &GradientSet) -> GradNorms {
    let l1 = |s: &[f64]| s.iter().map(|v| v.abs()).sum::<f64>();
    let [m, s, b] = grads.slices();
    GradNorms {
        m: l1(m),
        sigma: l1(s),
        b: l1(b),
    }
}

fn check_batch(model: &TskModel, xs: &ArrayView2<'_, f64>, ys: &[usize], loss: LossSpec) -> Result<()> {
    if xs.nrows() == 0 {
        return Err(TskError::Precondition("empty batch".into()));
    }
    if xs.nrows() != ys.len() {
        return Err(TskError::shape(
            format!("{} labels", xs.nrows()),
            format!("{} labels", ys.len()),
        ));
    }
    if xs.ncols() != model.input_dim() {
        return Err(TskError::shape(
            format!("{} features", model.input_dim()),
            format!("{} features", xs.ncols()),
        ));
    }
    loss.validate(model.num_classes())?;
    if loss == LossSpec::CrossEntropy {
        if let Some(&y) = ys.iter().find(|&&y| y >= model.num_classes()) {
            return Err(TskError::shape(
                format!("labels below {}", model.num_classes()),
                format!("label {y}"),
            ));
        }
    }
    Ok(())
}

/// Per-sample scratch buffers.
struct Workspace {
    x: Vec<f64>,
    z: Vec<f64>,
    fbar: Vec<f64>,
    rule_out: Vec<f64>,
    out: Vec<f64>,
    g: Vec<f64>,
}

impl Workspace {
    fn new(model: &TskModel) -> Self {
        let (r, d, c) = (model.num_rules(), model.input_dim(), model.num_classes());
        Self {
            x: vec![0.0; d],
            z: vec![0.0; r],
            fbar: vec![0.0; r],
            rule_out: vec![0.0; r * c],
            out: vec![0.0; c],
            g: vec![0.0; c],
        }
    }

    /// Forward pass and loss for one sample; leaves dL/dy in `g`.
    fn sample(&mut self, model: &TskModel, row: ndarray::ArrayView1<'_, f64>, y: usize, loss: LossSpec) -> Result<f64> {
        let c = model.num_classes();
        for (dst, &v) in self.x.iter_mut().zip(row.iter()) {
            *dst = v;
        }
        model.z_into(&self.x, &mut self.z);
        defuzzify_into(&self.z, model.variant(), model.log_eps(), &mut self.fbar)?;
        model.rule_outputs_into(&self.x, &mut self.rule_out);
        self.out.iter_mut().for_each(|o| *o = 0.0);
        for (f, yr) in self.fbar.iter().zip(self.rule_out.chunks_exact(c)) {
            for (o, &v) in self.out.iter_mut().zip(yr) {
                *o += f * v;
            }
        }
        Ok(loss.sample_loss(&self.out, y, &mut self.g))
    }
}

fn non_finite(sample: usize, value: f64) -> TskError {
    TskError::Numeric {
        context: format!("sample {sample}"),
        msg: format!("loss is {value}"),
    }
}

/// Mean loss over a batch.
pub fn batch_loss(model: &TskModel, xs: ArrayView2<'_, f64>, ys: &[usize], loss: LossSpec) -> Result<f64> {
    check_batch(model, &xs, ys, loss)?;
    let mut ws = Workspace::new(model);
    let mut total = 0.0;
    for (n, (row, &y)) in xs.rows().into_iter().zip(ys).enumerate() {
        let l = ws.sample(model, row, y, loss)?;
        if !l.is_finite() {
            return Err(non_finite(n, l));
        }
        total += l;
    }
    Ok(total / ys.len() as f64)
}

/// Mean loss over the batch and its exact gradient.
pub fn loss_and_grad(
    model: &TskModel,
    xs: ArrayView2<'_, f64>,
    ys: &[usize],
    loss: LossSpec,
) -> Result<(f64, GradientSet)> {
    check_batch(model, &xs, ys, loss)?;
    let (r_n, d_n, c_n) = (model.num_rules(), model.input_dim(), model.num_classes());
    let variant = model.variant();
    let zscale = if variant == DefuzzVariant::Htsk { 1.0 / d_n as f64 } else { 1.0 };
    let [centers, widths, _] = model.param_slices();

    let mut grads = GradientSet::zeros_like(model);
    let mut ws = Workspace::new(model);
    let mut s = vec![0.0; r_n];
    let mut dz = vec![0.0; r_n];
    let mut total = 0.0;

    for (n, (row, &y)) in xs.rows().into_iter().zip(ys).enumerate() {
        let l = ws.sample(model, row, y, loss)?;
        if !l.is_finite() {
            return Err(non_finite(n, l));
        }
        total += l;

        for (sr, yr) in s.iter_mut().zip(ws.rule_out.chunks_exact(c_n)) {
            *sr = yr.iter().zip(&ws.g).map(|(a, b)| a * b).sum();
        }
        let sbar: f64 = ws.fbar.iter().zip(&s).map(|(f, sr)| f * sr).sum();
        match variant {
            DefuzzVariant::Vanilla | DefuzzVariant::Htsk => {
                for ((d, &f), &sr) in dz.iter_mut().zip(&ws.fbar).zip(&s) {
                    *d = f * (sr - sbar);
                }
            }
            DefuzzVariant::LogTsk => {
                let eps = model.log_eps();
                for (((d, &f), &sr), &z) in dz.iter_mut().zip(&ws.fbar).zip(&s).zip(&ws.z) {
                    *d = f * (sr - sbar) / (-z + eps);
                }
            }
            DefuzzVariant::L1Norm => {
                let norm: f64 = ws.z.iter().map(|v| v.abs()).sum();
                for ((d, &sr), &z) in dz.iter_mut().zip(&s).zip(&ws.z) {
                    *d = (sr - z.signum() * sbar) / norm;
                }
            }
            DefuzzVariant::L2Norm => {
                let norm = ws.z.iter().map(|v| v * v).sum::<f64>().sqrt();
                for ((d, &sr), &f) in dz.iter_mut().zip(&s).zip(&ws.fbar) {
                    *d = (sr - f * sbar) / norm;
                }
            }
        }

        let [gm, gs, gb] = grads.slices_mut();
        for r in 0..r_n {
            // consequents: dL/db[r, j, c] = fbar_r * g_c * [1, x]_j
            let f = ws.fbar[r];
            let block = &mut gb[r * (d_n + 1) * c_n..(r + 1) * (d_n + 1) * c_n];
            let (bias, weights) = block.split_at_mut(c_n);
            for (bc, &gc) in bias.iter_mut().zip(&ws.g) {
                *bc += f * gc;
            }
            for (wrow, &xd) in weights.chunks_exact_mut(c_n).zip(&ws.x) {
                for (w, &gc) in wrow.iter_mut().zip(&ws.g) {
                    *w += f * gc * xd;
                }
            }

            let q = zscale * dz[r];
            if q == 0.0 {
                continue;
            }
            let base = r * d_n;
            for j in 0..d_n {
                let sd = widths[base + j];
                let w = effective_width(sd);
                let diff = ws.x[j] - centers[base + j];
                let t = diff / (w * w);
                gm[base + j] += q * t;
                gs[base + j] += q * t * diff / w * effective_width_derivative(sd);
            }
        }
    }

    let inv = 1.0 / ys.len() as f64;
    grads.scale(inv);
    if !grads.is_finite() {
        return Err(TskError::Numeric {
            context: "gradient".into(),
            msg: "non-finite gradient entries".into(),
        });
    }
    Ok((total * inv, grads))
}

/// Central finite-difference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// `(f(x + h) - f(x - h)) / 2h`, error O(h^2).
    ThreePoint,
    /// `(-f(x + 2h) + 8 f(x + h) - 8 f(x - h) + f(x - 2h)) / 12h`, error O(h^4).
    #[default]
    FivePoint,
}

impl Stencil {
    fn offsets(self) -> &'static [(f64, f64)] {
        match self {
            Stencil::ThreePoint => &[(1.0, 0.5), (-1.0, -0.5)],
            Stencil::FivePoint => &[
                (2.0, -1.0 / 12.0),
                (1.0, 8.0 / 12.0),
                (-1.0, -8.0 / 12.0),
                (-2.0, 1.0 / 12.0),
            ],
        }
    }

    /// Derivative estimate of `f` at `x` along one coordinate.
    fn apply(self, x: f64, step: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for &(k, w) in self.offsets() {
            acc += w * f(x + k * step)?;
        }
        Ok(acc / step)
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(TskError::Precondition(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    Ok(())
}

/// Central-difference gradient of `f` at `point`, one coordinate at a time.
pub fn central_difference<F>(point: &[f64], step: f64, stencil: Stencil, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_step(step)?;
    let mut p = point.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = p[i];
        let d = stencil.apply(orig, step, |v| {
            p[i] = v;
            f(&p)
        })?;
        p[i] = orig;
        out.push(d);
    }
    Ok(out)
}

/// Gradient of [`batch_loss`] by central differences, one parameter at a time.
pub fn finite_diff_grad(
    model: &TskModel,
    xs: ArrayView2<'_, f64>,
    ys: &[usize],
    loss: LossSpec,
    step: f64,
    stencil: Stencil,
) -> Result<GradientSet> {
    check_step(step)?;
    check_batch(model, &xs, ys, loss)?;
    let mut grads = GradientSet::zeros_like(model);
    for (group, out) in grads.slices_mut().into_iter().enumerate() {
        // each coordinate is independent, so the result does not depend on scheduling
        out.par_iter_mut()
            .enumerate()
            .try_for_each_init(
                || model.clone(),
                |probe, (i, g)| -> Result<()> {
                    let orig = model.param_slices()[group][i];
                    *g = stencil.apply(orig, step, |v| {
                        probe.param_slices_mut()[group][i] = v;
                        batch_loss(probe, xs, ys, loss)
                    })?;
                    probe.param_slices_mut()[group][i] = orig;
                    Ok(())
                },
            )?;
    }
    Ok(grads)
}

/// Largest elementwise `|a - b| / max(|a|, |b|, floor)` across two gradient sets.
pub fn max_relative_error(a: &GradientSet, b: &GradientSet, floor: f64) -> f64 {
    a.slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y.iter()))
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2, Array3};
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::rng::rng_from_seed;

    fn random_model(r: usize, d: usize, c: usize, variant: DefuzzVariant, seed: u64) -> TskModel {
        let mut rng = rng_from_seed(seed);
        let mut n = || rng.sample::<f64, _>(StandardNormal);
        let centers = Array2::from_shape_simple_fn((r, d), &mut n);
        let widths = Array2::zeros((r, d));
        let mut model = TskModel::new(centers, widths, Array3::zeros((r, d + 1, c)), variant).unwrap();
        let mut rng = rng_from_seed(seed ^ 0xABCD);
        for v in model.widths_mut().iter_mut() {
            *v = (d as f64).sqrt() * rng.random_range(0.7..1.3);
        }
        for v in model.consequents_mut().iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        model
    }

    fn random_batch(b: usize, d: usize, c: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let xs = Array2::from_shape_simple_fn((b, d), || rng.sample::<f64, _>(StandardNormal));
        let ys = (0..b).map(|i| i % c).collect();
        (xs, ys)
    }

    #[test]
    fn cross_entropy_matches_direct_formula() {
        let mut g = vec![0.0; 3];
        let out = [0.5, -1.0, 2.0];
        let l = LossSpec::CrossEntropy.sample_loss(&out, 1, &mut g);
        let z: f64 = out.iter().map(|v: &f64| v.exp()).sum();
        assert_abs_diff_eq!(l, -((-1.0f64).exp() / z).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(g.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
        assert!(g[1] < 0.0);
    }

    #[test]
    fn single_rule_has_zero_antecedent_gradient() {
        for v in DefuzzVariant::ALL {
            let model = random_model(1, 4, 3, v, 11);
            let (xs, ys) = random_batch(5, 4, 3, 12);
            let (_, g) = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
            assert!(g.d_centers.iter().all(|&x| x == 0.0), "{v}");
            assert!(g.d_widths.iter().all(|&x| x == 0.0), "{v}");
            assert!(g.d_consequents.iter().any(|&x| x != 0.0));
        }
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for (k, v) in DefuzzVariant::ALL.into_iter().enumerate() {
            let model = random_model(3, 5, 2, v, 100 + k as u64);
            let (xs, ys) = random_batch(4, 5, 2, 200 + k as u64);
            let (l, g) = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
            let fd = finite_diff_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy, 1e-5, Stencil::ThreePoint).unwrap();
            assert_abs_diff_eq!(l, batch_loss(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap(), epsilon = 1e-15);
            let err = max_relative_error(&g, &fd, 1e-8);
            assert!(err <= 1e-4, "{v}: max relative error {err}");
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let model = random_model(3, 4, 1, DefuzzVariant::Htsk, 5);
        let (xs, _) = random_batch(6, 4, 1, 6);
        let ys = vec![0, 1, 1, 0, 2, 1];
        let (_, g) = loss_and_grad(&model, xs.view(), &ys, LossSpec::MeanSquaredError).unwrap();
        let fd = finite_diff_grad(&model, xs.view(), &ys, LossSpec::MeanSquaredError, 1e-5, Stencil::ThreePoint).unwrap();
        assert!(max_relative_error(&g, &fd, 1e-8) <= 1e-4);
    }

    #[test]
    fn duplicated_batch_is_mean_invariant() {
        let model = random_model(3, 4, 2, DefuzzVariant::LogTsk, 3);
        let (xs, ys) = random_batch(3, 4, 2, 4);
        let xs2 = ndarray::concatenate![ndarray::Axis(0), xs, xs];
        let ys2: Vec<usize> = ys.iter().chain(&ys).copied().collect();
        let (l1, g1) = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
        let (l2, g2) = loss_and_grad(&model, xs2.view(), &ys2, LossSpec::CrossEntropy).unwrap();
        assert_abs_diff_eq!(l1, l2, epsilon = 1e-14);
        assert!(max_relative_error(&g1, &g2, 1e-12) < 1e-12);
    }

    #[test]
    fn clamped_widths_get_zero_gradient() {
        let mut model = random_model(2, 3, 2, DefuzzVariant::Vanilla, 8);
        model.widths_mut()[[0, 1]] = 1e-9;
        let (xs, ys) = random_batch(3, 3, 2, 9);
        let (_, g) = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
        assert_eq!(g.d_widths[[0, 1]], 0.0);
    }

    #[test]
    fn negative_widths_flip_gradient_sign() {
        let mut model = random_model(2, 3, 2, DefuzzVariant::Vanilla, 21);
        let (xs, ys) = random_batch(3, 3, 2, 22);
        let (_, g) = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
        model.widths_mut().mapv_inplace(|v| -v);
        let (_, gneg) = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
        for (a, b) in g.d_widths.iter().zip(gneg.d_widths.iter()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn central_difference_on_quadratic() {
        // f(p) = 3 p0^2 - 2 p0 p1 + p1^2, gradient (6 p0 - 2 p1, -2 p0 + 2 p1)
        let f = |p: &[f64]| Ok(3.0 * p[0] * p[0] - 2.0 * p[0] * p[1] + p[1] * p[1]);
        let g = central_difference(&[1.5, -0.5], 1e-3, Stencil::ThreePoint, f).unwrap();
        assert_abs_diff_eq!(g[0], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g[1], -4.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_step_is_rejected() {
        let model = random_model(2, 2, 2, DefuzzVariant::Vanilla, 1);
        let (xs, ys) = random_batch(2, 2, 2, 2);
        assert!(matches!(
            finite_diff_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy, 0.0, Stencil::FivePoint),
            Err(TskError::Precondition(_))
        ));
        assert!(central_difference(&[1.0], 0.0, Stencil::FivePoint, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn l1_norms_by_group() {
        let model = TskModel::zeros(2, 2, 2, DefuzzVariant::Vanilla).unwrap();
        let mut g = GradientSet::zeros_like(&model);
        assert_eq!(grad_l1_norms(&g), GradNorms::default());
        g.d_centers = array![[1.0, -2.0], [3.0, -4.0]];
        assert_eq!(grad_l1_norms(&g).m, 10.0);
        g.d_centers.mapv_inplace(|v| -v);
        assert_eq!(grad_l1_norms(&g).m, 10.0);
    }

    #[test]
    fn loss_spec_class_rules() {
        assert!(LossSpec::CrossEntropy.validate(1).is_err());
        assert!(LossSpec::MeanSquaredError.validate(2).is_err());
        assert!(LossSpec::CrossEntropy.validate(2).is_ok());
        assert_eq!(LossSpec::for_classes(1), LossSpec::MeanSquaredError);
    }

    #[test]
    fn pathological_parameters_report_numeric_error() {
        let mut model = random_model(2, 2, 2, DefuzzVariant::Vanilla, 1);
        model.consequents_mut()[[0, 0, 0]] = f64::INFINITY;
        let (xs, ys) = random_batch(2, 2, 2, 2);
        let err = loss_and_grad(&model, xs.view(), &ys, LossSpec::CrossEntropy).unwrap_err();
        assert!(matches!(err, TskError::Numeric { .. }), "{err:?}");
    }
}
