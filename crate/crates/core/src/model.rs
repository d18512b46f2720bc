//! First-order TSK model with Gaussian memberships and product t-norm.
//!
//! Firing levels are never formed as products of memberships. Each rule's
//! log firing level `z_r = -sum_d (x_d - m_rd)^2 / (2 sigma_rd^2)` is
//! computed directly and the defuzzifier normalizes the `z` vector.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};

/// Lower clamp applied to `|sigma|` whenever a width enters the math.
pub const SIGMA_MIN: f64 = 1e-8;

/// Offset added to `-z` in the LogTSK denominator so that an input sitting
/// exactly on a rule center does not divide by zero.
pub const LOG_EPS: f64 = 1e-12;

/// A rule counts as fired when its normalized firing level exceeds this.
pub const FIRED_THRESHOLD: f64 = 1e-4;

/// Defuzzification operator mapping the `z` vector to normalized firing levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefuzzVariant {
    /// Softmax over `z` (classic normalized product firing).
    Vanilla,
    /// Softmax over the dimension-averaged `z`.
    Htsk,
    /// L1-normalized `1 / (-z)`.
    #[serde(rename = "logtsk", alias = "log-tsk")]
    LogTsk,
    /// `z / ||z||_1`; experimental, levels are negative.
    L1Norm,
    /// `z / ||z||_2`; experimental, levels are negative.
    L2Norm,
}

impl DefuzzVariant {
    pub const ALL: [DefuzzVariant; 5] = [
        DefuzzVariant::Vanilla,
        DefuzzVariant::Htsk,
        DefuzzVariant::LogTsk,
        DefuzzVariant::L1Norm,
        DefuzzVariant::L2Norm,
    ];

    /// Variants offered by default in the command-line tools.
    pub const STANDARD: [DefuzzVariant; 3] =
        [DefuzzVariant::Vanilla, DefuzzVariant::Htsk, DefuzzVariant::LogTsk];

    pub fn name(self) -> &'static str {
        match self {
            DefuzzVariant::Vanilla => "vanilla",
            DefuzzVariant::Htsk => "htsk",
            DefuzzVariant::LogTsk => "logtsk",
            DefuzzVariant::L1Norm => "l1-norm",
            DefuzzVariant::L2Norm => "l2-norm",
        }
    }

    /// Whether the normalized firing levels are a probability vector.
    pub fn sums_to_one(self) -> bool {
        matches!(
            self,
            DefuzzVariant::Vanilla | DefuzzVariant::Htsk | DefuzzVariant::LogTsk
        )
    }

    /// Factor applied to the summed squared distances when forming `z`.
    fn z_scale(self, dim: usize) -> f64 {
        match self {
            DefuzzVariant::Htsk => 1.0 / dim as f64,
            _ => 1.0,
        }
    }
}

impl fmt::Display for DefuzzVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefuzzVariant {
    type Err = TskError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" | "tsk" | "softmax" => Ok(DefuzzVariant::Vanilla),
            "htsk" => Ok(DefuzzVariant::Htsk),
            "logtsk" | "log-tsk" | "log" => Ok(DefuzzVariant::LogTsk),
            "l1" | "l1-norm" | "l1norm" => Ok(DefuzzVariant::L1Norm),
            "l2" | "l2-norm" | "l2norm" => Ok(DefuzzVariant::L2Norm),
            other => Err(TskError::Config(format!(
                "unknown defuzzification variant {other:?} (expected vanilla, htsk, logtsk, l1-norm or l2-norm)"
            ))),
        }
    }
}

/// Width actually used in the math for a stored width parameter.
#[inline]
pub fn effective_width(stored: f64) -> f64 {
    stored.abs().max(SIGMA_MIN)
}

/// Derivative of [`effective_width`]: the sign outside the clamp, zero inside.
#[inline]
pub fn effective_width_derivative(stored: f64) -> f64 {
    if stored.abs() > SIGMA_MIN {
        stored.signum()
    } else {
        0.0
    }
}

/// Normalizes `z` with the given variant and the default LogTSK offset.
pub fn defuzzify(z: &[f64], variant: DefuzzVariant) -> Result<Vec<f64>> {
    defuzzify_with_eps(z, variant, LOG_EPS)
}

/// Like [`defuzzify`] with an explicit LogTSK offset (0 disables it).
pub fn defuzzify_with_eps(z: &[f64], variant: DefuzzVariant, log_eps: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; z.len()];
    defuzzify_into(z, variant, log_eps, &mut out)?;
    Ok(out)
}

pub(crate) fn defuzzify_into(
    z: &[f64],
    variant: DefuzzVariant,
    log_eps: f64,
    out: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(z.len(), out.len());
    if z.is_empty() {
        return Err(TskError::Degenerate("empty z vector".into()));
    }
    if let Some(v) = z.iter().find(|v| !v.is_finite()) {
        return Err(TskError::Numeric {
            context: "defuzzify".into(),
            msg: format!("non-finite z entry {v}"),
        });
    }
    match variant {
        DefuzzVariant::Vanilla | DefuzzVariant::Htsk => {
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (o, &v) in out.iter_mut().zip(z) {
                *o = (v - zmax).exp();
                sum += *o;
            }
            out.iter_mut().for_each(|o| *o /= sum);
        }
        DefuzzVariant::LogTsk => {
            let mut sum = 0.0;
            for (o, &v) in out.iter_mut().zip(z) {
                let denom = -v + log_eps;
                if denom <= 0.0 {
                    return Err(TskError::Degenerate(format!(
                        "LogTSK needs -z + eps > 0, got z = {v}"
                    )));
                }
                *o = 1.0 / denom;
                sum += *o;
            }
            if !sum.is_finite() {
                return Err(TskError::Numeric {
                    context: "defuzzify".into(),
                    msg: "LogTSK normalizer overflowed".into(),
                });
            }
            out.iter_mut().for_each(|o| *o /= sum);
        }
        DefuzzVariant::L1Norm | DefuzzVariant::L2Norm => {
            let norm = if variant == DefuzzVariant::L1Norm {
                z.iter().map(|v| v.abs()).sum::<f64>()
            } else {
                z.iter().map(|v| v * v).sum::<f64>().sqrt()
            };
            if norm == 0.0 {
                return Err(TskError::Degenerate(format!(
                    "{variant} normalization of an all-zero z vector"
                )));
            }
            for (o, &v) in out.iter_mut().zip(z) {
                *o = v / norm;
            }
        }
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `sum_d ((x_d - m_d) / w_d)^2` with four partial sums.
fn scaled_sq_dist(x: &[f64], m: &[f64], s: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, mc, sc) = (x.chunks_exact(4), m.chunks_exact(4), s.chunks_exact(4));
    let (xr, mr, sr) = (xc.remainder(), mc.remainder(), sc.remainder());
    for ((xq, mq), sq) in xc.zip(mc).zip(sc) {
        for k in 0..4 {
            let t = (xq[k] - mq[k]) / effective_width(sq[k]);
            acc[k] += t * t;
        }
    }
    let mut tail = 0.0;
    for ((&xd, &md), &sd) in xr.iter().zip(mr).zip(sr) {
        let t = (xd - md) / effective_width(sd);
        tail += t * t;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Everything computed for one input by [`TskModel::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiringState {
    pub z: Vec<f64>,
    pub fbar: Vec<f64>,
    /// R x C affine rule outputs.
    pub rule_outputs: Array2<f64>,
    /// C outputs, `sum_r fbar_r * rule_outputs_r`.
    pub output: Vec<f64>,
}

/// Multi-output first-order TSK model.
///
/// `consequents[[r, 0, c]]` is the bias of rule `r` for output `c`;
/// `consequents[[r, 1 + d, c]]` multiplies feature `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TskModel {
    centers: Array2<f64>,
    widths: Array2<f64>,
    consequents: Array3<f64>,
    variant: DefuzzVariant,
    log_eps: f64,
}

impl TskModel {
    pub fn new(
        centers: Array2<f64>,
        widths: Array2<f64>,
        consequents: Array3<f64>,
        variant: DefuzzVariant,
    ) -> Result<Self> {
        let (r, d) = centers.dim();
        if r == 0 || d == 0 {
            return Err(TskError::Schema("model needs at least one rule and one input".into()));
        }
        if widths.dim() != (r, d) {
            return Err(TskError::shape(
                format!("widths {r}x{d}"),
                format!("widths {}x{}", widths.nrows(), widths.ncols()),
            ));
        }
        let (cr, cd, c) = consequents.dim();
        if cr != r || cd != d + 1 || c == 0 {
            return Err(TskError::shape(
                format!("consequents {r}x{}xC with C >= 1", d + 1),
                format!("consequents {cr}x{cd}x{c}"),
            ));
        }
        Ok(Self {
            centers: centers.as_standard_layout().into_owned(),
            widths: widths.as_standard_layout().into_owned(),
            consequents: consequents.as_standard_layout().into_owned(),
            variant,
            log_eps: LOG_EPS,
        })
    }

    /// Model with zero centers and consequents and unit widths.
    pub fn zeros(rules: usize, dim: usize, classes: usize, variant: DefuzzVariant) -> Result<Self> {
        Self::new(
            Array2::zeros((rules, dim)),
            Array2::ones((rules, dim)),
            Array3::zeros((rules, dim + 1, classes)),
            variant,
        )
    }

    pub fn num_rules(&self) -> usize {
        self.centers.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.consequents.dim().2
    }

    pub fn variant(&self) -> DefuzzVariant {
        self.variant
    }

    pub fn set_variant(&mut self, variant: DefuzzVariant) {
        self.variant = variant;
    }

    pub fn log_eps(&self) -> f64 {
        self.log_eps
    }

    pub fn set_log_eps(&mut self, eps: f64) {
        self.log_eps = eps;
    }

    pub fn centers(&self) -> &Array2<f64> {
        &self.centers
    }

    pub fn widths(&self) -> &Array2<f64> {
        &self.widths
    }

    pub fn consequents(&self) -> &Array3<f64> {
        &self.consequents
    }

    pub fn centers_mut(&mut self) -> &mut Array2<f64> {
        &mut self.centers
    }

    pub fn widths_mut(&mut self) -> &mut Array2<f64> {
        &mut self.widths
    }

    pub fn consequents_mut(&mut self) -> &mut Array3<f64> {
        &mut self.consequents
    }

    /// Parameter groups as flat slices: centers, widths, consequents.
    pub fn param_slices(&self) -> [&[f64]; 3] {
        [
            self.centers.as_slice().expect("standard layout"),
            self.widths.as_slice().expect("standard layout"),
            self.consequents.as_slice().expect("standard layout"),
        ]
    }

    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.centers.as_slice_mut().expect("standard layout"),
            self.widths.as_slice_mut().expect("standard layout"),
            self.consequents.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.centers.len() + self.widths.len() + self.consequents.len()
    }

    pub fn params_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(TskError::shape(
                format!("input of dimension {}", self.input_dim()),
                format!("dimension {}", x.len()),
            ));
        }
        Ok(())
    }

    /// Gaussian membership degrees of `x` in each fuzzy set of rule `r`.
    pub fn membership(&self, x: &[f64], r: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if r >= self.num_rules() {
            return Err(TskError::Precondition(format!(
                "rule {r} out of range for {} rules",
                self.num_rules()
            )));
        }
        Ok(x.iter()
            .zip(self.centers.row(r))
            .zip(self.widths.row(r))
            .map(|((&xd, &m), &s)| {
                let w = effective_width(s);
                let t = (xd - m) / w;
                (-0.5 * t * t).exp()
            })
            .collect())
    }

    /// Log firing level of every rule (dimension-averaged for HTSK).
    pub fn compute_z(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut z = vec![0.0; self.num_rules()];
        self.z_into(x, &mut z);
        Ok(z)
    }

    pub(crate) fn z_into(&self, x: &[f64], z: &mut [f64]) {
        let d = self.input_dim();
        let scale = self.variant.z_scale(d);
        let centers = self.centers.as_slice().expect("standard layout");
        let widths = self.widths.as_slice().expect("standard layout");
        for (r, zr) in z.iter_mut().enumerate() {
            let m = &centers[r * d..(r + 1) * d];
            let s = &widths[r * d..(r + 1) * d];
            *zr = -0.5 * scale * scaled_sq_dist(x, m, s);
        }
    }

    /// Affine rule outputs, R x C row-major.
    pub(crate) fn rule_outputs_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.input_dim();
        let c = self.num_classes();
        let b = self.consequents.as_slice().expect("standard layout");
        for r in 0..self.num_rules() {
            let br = &b[r * (d + 1) * c..(r + 1) * (d + 1) * c];
            let o = &mut out[r * c..(r + 1) * c];
            o.copy_from_slice(&br[..c]);
            // four input rows per pass shortens the dependency chain on `o`
            let mut quads = br[c..].chunks_exact(4 * c);
            let mut xq = x.chunks_exact(4);
            for (rows, xv) in (&mut quads).zip(&mut xq) {
                let (r01, r23) = rows.split_at(2 * c);
                let (r0, r1) = r01.split_at(c);
                let (r2, r3) = r23.split_at(c);
                for k in 0..c {
                    o[k] += (r0[k] * xv[0] + r1[k] * xv[1]) + (r2[k] * xv[2] + r3[k] * xv[3]);
                }
            }
            for (row, &xd) in quads.remainder().chunks_exact(c).zip(xq.remainder()) {
                for (oc, &bc) in o.iter_mut().zip(row) {
                    *oc += bc * xd;
                }
            }
        }
    }

    /// Normalized firing levels of one input.
    pub fn firing_levels(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.compute_z(x)?;
        defuzzify_with_eps(&z, self.variant, self.log_eps)
    }

    pub fn forward(&self, x: &[f64]) -> Result<FiringState> {
        self.check_input(x)?;
        let (r, c) = (self.num_rules(), self.num_classes());
        let mut z = vec![0.0; r];
        self.z_into(x, &mut z);
        let mut fbar = vec![0.0; r];
        defuzzify_into(&z, self.variant, self.log_eps, &mut fbar)?;
        let mut rule_outputs = vec![0.0; r * c];
        self.rule_outputs_into(x, &mut rule_outputs);
        let mut output = vec![0.0; c];
        for (f, yr) in fbar.iter().zip(rule_outputs.chunks_exact(c)) {
            for (o, &y) in output.iter_mut().zip(yr) {
                *o += f * y;
            }
        }
        Ok(FiringState {
            z,
            fbar,
            rule_outputs: Array2::from_shape_vec((r, c), rule_outputs).expect("R*C outputs"),
            output,
        })
    }

    /// Scores and argmax labels for every row of `xs`.
    pub fn predict_batch(&self, xs: ArrayView2<'_, f64>) -> Result<(Vec<usize>, Array2<f64>)> {
        if xs.ncols() != self.input_dim() {
            return Err(TskError::shape(
                format!("{} features", self.input_dim()),
                format!("{} features", xs.ncols()),
            ));
        }
        let (r, c) = (self.num_rules(), self.num_classes());
        let mut scores = Array2::zeros((xs.nrows(), c));
        let mut labels = Vec::with_capacity(xs.nrows());
        let mut z = vec![0.0; r];
        let mut fbar = vec![0.0; r];
        let mut yr = vec![0.0; r * c];
        let mut buf = Vec::new();
        for (row, mut out) in xs.rows().into_iter().zip(scores.rows_mut()) {
            let x = match row.as_slice() {
                Some(s) => s,
                None => {
                    buf.clear();
                    buf.extend(row.iter().copied());
                    &buf[..]
                }
            };
            self.z_into(x, &mut z);
            defuzzify_into(&z, self.variant, self.log_eps, &mut fbar)?;
            self.rule_outputs_into(x, &mut yr);
            for (f, y) in fbar.iter().zip(yr.chunks_exact(c)) {
                for (o, &v) in out.iter_mut().zip(y) {
                    *o += f * v;
                }
            }
            labels.push(argmax(out.as_slice().expect("standard layout")));
        }
        Ok((labels, scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array3};

    fn one_rule(center: Vec<f64>, width: Vec<f64>, variant: DefuzzVariant) -> TskModel {
        let d = center.len();
        TskModel::new(
            Array2::from_shape_vec((1, d), center).unwrap(),
            Array2::from_shape_vec((1, d), width).unwrap(),
            Array3::zeros((1, d + 1, 1)),
            variant,
        )
        .unwrap()
    }

    #[test]
    fn membership_at_center_and_one_sigma() {
        let m = one_rule(vec![0.5, -1.0], vec![2.0, 0.5], DefuzzVariant::Vanilla);
        assert_eq!(m.membership(&[0.5, -1.0], 0).unwrap(), vec![1.0, 1.0]);
        let mu = m.membership(&[2.5, -0.5], 0).unwrap();
        for v in mu {
            assert_abs_diff_eq!(v, (-0.5f64).exp(), epsilon = 1e-15);
            assert_abs_diff_eq!(v, 0.6065, epsilon = 1e-4);
        }
    }

    #[test]
    fn membership_clamps_tiny_widths() {
        let m = one_rule(vec![0.0], vec![1e-20], DefuzzVariant::Vanilla);
        let expect = (-0.5 * (1e-9f64 / SIGMA_MIN).powi(2)).exp();
        assert_abs_diff_eq!(m.membership(&[1e-9], 0).unwrap()[0], expect, epsilon = 1e-15);
        assert_eq!(effective_width(-3.0), 3.0);
        assert_eq!(effective_width(0.0), SIGMA_MIN);
    }

    #[test]
    fn z_vanilla_and_htsk() {
        let mut m = one_rule(vec![0.0, 0.0], vec![1.0, 1.0], DefuzzVariant::Vanilla);
        assert_eq!(m.compute_z(&[1.0, 1.0]).unwrap(), vec![-1.0]);
        m.set_variant(DefuzzVariant::Htsk);
        assert_eq!(m.compute_z(&[1.0, 1.0]).unwrap(), vec![-0.5]);
        let m1 = one_rule(vec![0.3], vec![1.0], DefuzzVariant::Vanilla);
        assert_eq!(m1.compute_z(&[0.3]).unwrap(), vec![0.0]);
    }

    #[test]
    fn softmax_worked_examples() {
        let f = defuzzify(&[-0.1, -0.5, -0.3], DefuzzVariant::Vanilla).unwrap();
        for (a, b) in f.iter().zip([0.4018, 0.2693, 0.3289]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-4);
        }
        let f = defuzzify(&[-10.0, -50.0, -30.0], DefuzzVariant::Vanilla).unwrap();
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-8);
        assert!((f[1] / 4e-18 - 1.0).abs() < 0.1, "{}", f[1]);
        assert!((f[2] / 2e-9 - 1.0).abs() < 0.1, "{}", f[2]);
    }

    #[test]
    fn uniform_z_gives_uniform_levels() {
        let z = [-2.5; 4];
        for v in DefuzzVariant::ALL {
            let f = defuzzify(&z, v).unwrap();
            assert!(f.iter().all(|&x| x == f[0]), "{v}: {f:?}");
        }
        assert_abs_diff_eq!(defuzzify(&z, DefuzzVariant::LogTsk).unwrap()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(defuzzify(&z, DefuzzVariant::Vanilla).unwrap()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(defuzzify(&z, DefuzzVariant::L1Norm).unwrap()[0], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(defuzzify(&z, DefuzzVariant::L2Norm).unwrap()[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_norm_is_degenerate() {
        for v in [DefuzzVariant::L1Norm, DefuzzVariant::L2Norm] {
            assert!(matches!(defuzzify(&[0.0, 0.0], v), Err(TskError::Degenerate(_))));
        }
        assert!(matches!(
            defuzzify_with_eps(&[0.0, -1.0], DefuzzVariant::LogTsk, 0.0),
            Err(TskError::Degenerate(_))
        ));
        // default offset keeps a zero distance finite
        let f = defuzzify(&[0.0, -1.0], DefuzzVariant::LogTsk).unwrap();
        assert!(f[0] > 0.999_999 && f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_survives_huge_negative_z() {
        let f = defuzzify(&[-1e6, -1e6 + 3.0, -2e6], DefuzzVariant::Vanilla).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(f.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_rule_forward_is_its_affine_output() {
        for v in DefuzzVariant::ALL {
            let mut m = TskModel::new(
                array![[0.0, 1.0]],
                array![[1.0, 2.0]],
                Array3::from_shape_vec((1, 3, 2), vec![0.5, -1.0, 2.0, 0.0, 1.0, 3.0]).unwrap(),
                v,
            )
            .unwrap();
            m.set_log_eps(LOG_EPS);
            let st = m.forward(&[1.0, -1.0]).unwrap();
            if v.sums_to_one() {
                assert_eq!(st.fbar, vec![1.0]);
                assert_abs_diff_eq!(st.output[0], 0.5 + 2.0 - 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(st.output[1], -1.0 + 0.0 - 3.0, epsilon = 1e-15);
            } else {
                assert_eq!(st.fbar, vec![-1.0]);
            }
        }
    }

    #[test]
    fn shared_consequents_give_shared_output() {
        let b_rule = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9];
        let b = Array3::from_shape_fn((3, 3, 2), |(_, j, c)| b_rule[j * 2 + c]);
        for v in [DefuzzVariant::Vanilla, DefuzzVariant::Htsk, DefuzzVariant::LogTsk] {
            let m = TskModel::new(
                array![[0.0, 0.0], [1.0, -1.0], [2.0, 0.5]],
                array![[1.0, 1.0], [0.5, 2.0], [1.5, 0.7]],
                b.clone(),
                v,
            )
            .unwrap();
            let x = [0.4, -0.2];
            let st = m.forward(&x).unwrap();
            let expect0 = 0.3 + 1.1 * 0.4 - 0.4 * -0.2;
            let expect1 = -0.7 + 0.2 * 0.4 + 0.9 * -0.2;
            assert_abs_diff_eq!(st.output[0], expect0, epsilon = 1e-14);
            assert_abs_diff_eq!(st.output[1], expect1, epsilon = 1e-14);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.8]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[1.0]), 0);
    }

    #[test]
    fn predict_batch_matches_forward() {
        let m = TskModel::new(
            array![[0.0, 0.0], [1.0, 1.0]],
            array![[1.0, 1.0], [1.0, 1.0]],
            Array3::from_shape_fn((2, 3, 2), |(r, j, c)| (r + 2 * j) as f64 * if c == 0 { 1.0 } else { -0.5 }),
            DefuzzVariant::Htsk,
        )
        .unwrap();
        let xs = array![[0.1, 0.2], [2.0, -1.0], [-0.3, 0.9]];
        let (labels, scores) = m.predict_batch(xs.view()).unwrap();
        for (i, row) in xs.rows().into_iter().enumerate() {
            let st = m.forward(row.as_slice().unwrap()).unwrap();
            assert_eq!(scores.row(i).to_vec(), st.output);
            assert_eq!(labels[i], argmax(&st.output));
        }
        // column-sliced (non-contiguous) rows go through the copy path
        let t = xs.t().to_owned();
        let (l2, s2) = m.predict_batch(t.t()).unwrap();
        assert_eq!(l2, labels);
        assert_eq!(s2, scores);
    }

    #[test]
    fn shape_checks() {
        let m = TskModel::zeros(2, 3, 2, DefuzzVariant::Vanilla).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(TskError::Shape { .. })));
        assert!(m.predict_batch(Array2::zeros((2, 2)).view()).is_err());
        assert!(TskModel::new(Array2::zeros((2, 3)), Array2::ones((2, 2)), Array3::zeros((2, 4, 1)), DefuzzVariant::Vanilla).is_err());
        assert!(TskModel::new(Array2::zeros((2, 3)), Array2::ones((2, 3)), Array3::zeros((2, 3, 1)), DefuzzVariant::Vanilla).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in DefuzzVariant::ALL {
            assert_eq!(v.name().parse::<DefuzzVariant>().unwrap(), v);
        }
        assert!("bogus".parse::<DefuzzVariant>().is_err());
    }
}
