//! Forward pass and gradients checked against independent reference
//! computations written directly from the rule definitions.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;
use tsk_core::gradients::{finite_diff_grad, loss_and_grad, max_relative_error, LossSpec, Stencil};
use tsk_core::model::{defuzzify, defuzzify_with_eps};
use tsk_core::rng::rng_from_seed;
use tsk_core::{DefuzzVariant, TskModel};

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_model(r: usize, d: usize, c: usize, width_scale: f64, variant: DefuzzVariant, seed: u64) -> TskModel {
    let mut rng = rng_from_seed(seed);
    let centers = Array2::from_shape_simple_fn((r, d), || normal(&mut rng));
    let widths = Array2::from_shape_simple_fn((r, d), || width_scale * rng.random_range(0.5..1.5));
    let consequents = Array3::from_shape_simple_fn((r, d + 1, c), || 0.3 * normal(&mut rng));
    TskModel::new(centers, widths, consequents, variant).unwrap()
}

fn random_x(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..d).map(|_| normal(&mut rng)).collect()
}

/// Firing strength as the product of Gaussian membership degrees.
fn product_firing(model: &TskModel, x: &[f64], r: usize) -> f64 {
    let m = model.centers();
    let s = model.widths();
    (0..x.len())
        .map(|d| (-(x[d] - m[[r, d]]).powi(2) / (2.0 * s[[r, d]].powi(2))).exp())
        .product()
}

/// Normalized firing levels computed from the product form of each rule.
fn oracle_levels(model: &TskModel, x: &[f64]) -> Vec<f64> {
    let r = model.num_rules();
    let d = x.len() as f64;
    let raw: Vec<f64> = (0..r)
        .map(|k| {
            let f = product_firing(model, x, k);
            match model.variant() {
                DefuzzVariant::Vanilla => f,
                // geometric mean of the memberships
                DefuzzVariant::Htsk => f.powf(1.0 / d),
                DefuzzVariant::LogTsk => -1.0 / f.ln(),
                DefuzzVariant::L1Norm | DefuzzVariant::L2Norm => f.ln(),
            }
        })
        .collect();
    let norm = match model.variant() {
        DefuzzVariant::L2Norm => raw.iter().map(|v| v * v).sum::<f64>().sqrt(),
        DefuzzVariant::L1Norm => raw.iter().map(|v| v.abs()).sum(),
        _ => raw.iter().sum(),
    };
    raw.iter().map(|v| v / norm).collect()
}

fn oracle_output(model: &TskModel, x: &[f64]) -> Vec<f64> {
    let b = model.consequents();
    let levels = oracle_levels(model, x);
    (0..model.num_classes())
        .map(|c| {
            levels
                .iter()
                .enumerate()
                .map(|(r, f)| {
                    let affine = b[[r, 0, c]] + x.iter().enumerate().map(|(d, xd)| b[[r, d + 1, c]] * xd).sum::<f64>();
                    f * affine
                })
                .sum()
        })
        .collect()
}

#[test]
fn forward_matches_product_form_for_every_variant() {
    for (i, variant) in DefuzzVariant::ALL.into_iter().enumerate() {
        for seed in 0..20u64 {
            let d = 1 + (seed as usize % 6);
            let model = random_model(4, d, 3, 1.0, variant, seed * 10 + i as u64);
            let x = random_x(d, seed + 1000);
            let state = model.forward(&x).unwrap();
            let want = oracle_levels(&model, &x);
            // exp-then-ln in the oracle loses digits when a firing strength is near 1
            for (a, b) in state.fbar.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12 + 1e-8 * b.abs(), "{variant:?} seed {seed}: {a} vs {b}");
            }
            for (a, b) in state.output.iter().zip(oracle_output(&model, &x)) {
                assert!((a - b).abs() < 1e-11 + 1e-8 * b.abs(), "{variant:?} seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn log_firing_is_log_of_product() {
    let model = random_model(5, 4, 2, 1.0, DefuzzVariant::Vanilla, 3);
    let x = random_x(4, 4);
    let z = model.compute_z(&x).unwrap();
    for (r, zr) in z.iter().enumerate() {
        assert!((zr - product_firing(&model, &x, r).ln()).abs() < 1e-12);
    }
}

#[test]
fn softmax_worked_examples_from_known_values() {
    let f = defuzzify(&[-0.1, -0.5, -0.3], DefuzzVariant::Vanilla).unwrap();
    for (a, b) in f.iter().zip([0.4018, 0.2693, 0.3289]) {
        assert!((a - b).abs() < 1e-4);
    }
    let f = defuzzify(&[-10.0, -50.0, -30.0], DefuzzVariant::Vanilla).unwrap();
    assert!((f[0] - 1.0).abs() < 1e-8);
    assert!((f[1] / (-40.0f64).exp() - 1.0).abs() < 1e-8);
    assert!((f[2] / (-20.0f64).exp() - 1.0).abs() < 1e-8);
    assert!(f[1] < 1e-17 && f[2] < 1e-8);
}

#[test]
fn htsk_equals_vanilla_with_widths_scaled_by_sqrt_d() {
    for (k, d) in [2usize, 50, 784].into_iter().enumerate() {
        for seed in 0..10u64 {
            let htsk = random_model(7, d, 2, 1.0, DefuzzVariant::Htsk, 100 * k as u64 + seed);
            let mut vanilla = htsk.clone();
            vanilla.set_variant(DefuzzVariant::Vanilla);
            vanilla.widths_mut().mapv_inplace(|s| s * (d as f64).sqrt());
            let x = random_x(d, seed + 7);
            let a = htsk.firing_levels(&x).unwrap();
            let b = vanilla.firing_levels(&x).unwrap();
            let err = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12, "D={d} seed {seed}: {err}");
        }
    }
}

#[test]
fn one_dimensional_htsk_is_vanilla() {
    let htsk = random_model(6, 1, 3, 1.0, DefuzzVariant::Htsk, 11);
    let mut vanilla = htsk.clone();
    vanilla.set_variant(DefuzzVariant::Vanilla);
    for seed in 0..10 {
        let x = random_x(1, seed);
        assert_eq!(htsk.forward(&x).unwrap().output, vanilla.forward(&x).unwrap().output);
    }
}

#[test]
fn normalized_variants_are_scale_invariant() {
    let mut rng = rng_from_seed(5);
    for _ in 0..50 {
        let z: Vec<f64> = (0..8).map(|_| -rng.random_range(0.01..40.0)).collect();
        for variant in [DefuzzVariant::L1Norm, DefuzzVariant::L2Norm, DefuzzVariant::LogTsk] {
            let base = defuzzify_with_eps(&z, variant, 0.0).unwrap();
            for h in [0.01, 1.0, 100.0] {
                let scaled: Vec<f64> = z.iter().map(|v| v * h).collect();
                let got = defuzzify_with_eps(&scaled, variant, 0.0).unwrap();
                let err = got.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err <= 1e-12, "{variant:?} h={h}: {err}");
            }
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for (i, variant) in DefuzzVariant::ALL.into_iter().enumerate() {
        for d in [1usize, 5, 50] {
            for (r, c) in [(1usize, 2usize), (3, 5), (10, 2)] {
                let seed = (i * 1000 + d * 10 + r) as u64;
                let scale = if variant == DefuzzVariant::Htsk { 1.0 } else { (d as f64).sqrt() };
                let model = random_model(r, d, c, scale, variant, seed);
                let mut rng = rng_from_seed(seed ^ 77);
                let xs = Array2::from_shape_simple_fn((3, d), || normal(&mut rng));
                let ys: Vec<usize> = (0..3).map(|_| rng.random_range(0..c)).collect();
                let loss = LossSpec::for_classes(c);
                let (_, g) = loss_and_grad(&model, xs.view(), &ys, loss).unwrap();
                let fd = finite_diff_grad(&model, xs.view(), &ys, loss, 1e-3, Stencil::FivePoint).unwrap();
                let err = max_relative_error(&g, &fd, 1e-8);
                assert!(err <= 1e-4, "{variant:?} D={d} R={r} C={c}: {err}");
            }
        }
    }
}

#[test]
fn htsk_width_gradient_follows_the_reparameterization() {
    // HTSK(sigma) == vanilla(sqrt(D) sigma), so dL/dsigma_htsk = sqrt(D) dL/dsigma_vanilla
    let d = 12;
    let htsk = random_model(4, d, 3, 1.0, DefuzzVariant::Htsk, 21);
    let mut vanilla = htsk.clone();
    vanilla.set_variant(DefuzzVariant::Vanilla);
    vanilla.widths_mut().mapv_inplace(|s| s * (d as f64).sqrt());
    let mut rng = rng_from_seed(22);
    let xs = Array2::from_shape_simple_fn((5, d), || normal(&mut rng));
    let ys = vec![0, 1, 2, 1, 0];
    let (la, ga) = loss_and_grad(&htsk, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
    let (lb, gb) = loss_and_grad(&vanilla, xs.view(), &ys, LossSpec::CrossEntropy).unwrap();
    assert!((la - lb).abs() < 1e-12);
    for (a, b) in ga.d_centers.iter().zip(gb.d_centers.iter()) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
    }
    for (a, b) in ga.d_widths.iter().zip(gb.d_widths.iter()) {
        let want = b * (d as f64).sqrt();
        assert!((a - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }
    for (a, b) in ga.d_consequents.iter().zip(gb.d_consequents.iter()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn regression_loss_gradients_match_finite_differences() {
    let model = random_model(3, 4, 1, 2.0, DefuzzVariant::LogTsk, 31);
    let mut rng = rng_from_seed(32);
    let xs = Array2::from_shape_simple_fn((4, 4), || normal(&mut rng));
    let ys = vec![0, 1, 2, 1];
    let (_, g) = loss_and_grad(&model, xs.view(), &ys, LossSpec::MeanSquaredError).unwrap();
    let fd = finite_diff_grad(&model, xs.view(), &ys, LossSpec::MeanSquaredError, 1e-3, Stencil::FivePoint).unwrap();
    assert!(max_relative_error(&g, &fd, 1e-8) <= 1e-4);
}
