use ndarray::{Array2, Array3};
use proptest::prelude::*;
use tsk_core::data::{split, synth_gaussian, zscore_fit_transform, Labeling, SplitSpec};
use tsk_core::diagnostics::{average_firing, count_fired_rules, Percentiles};
use tsk_core::model::{defuzzify, defuzzify_with_eps};
use tsk_core::{Checkpoint, Dataset, DefuzzVariant, NormStats, TskModel};

fn z_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-200.0..-1e-3f64, len)
}

fn variant() -> impl Strategy<Value = DefuzzVariant> {
    prop::sample::select(DefuzzVariant::ALL.to_vec())
}

fn model_strategy() -> impl Strategy<Value = (TskModel, Array2<f64>)> {
    (1usize..6, 1usize..6, 1usize..4, variant()).prop_flat_map(|(r, d, c, v)| {
        (
            prop::collection::vec(-2.0..2.0f64, r * d),
            prop::collection::vec(0.3..3.0f64, r * d),
            prop::collection::vec(-1.0..1.0f64, r * (d + 1) * c),
            prop::collection::vec(-3.0..3.0f64, 4 * d),
        )
            .prop_map(move |(m, s, b, x)| {
                let model = TskModel::new(
                    Array2::from_shape_vec((r, d), m).unwrap(),
                    Array2::from_shape_vec((r, d), s).unwrap(),
                    Array3::from_shape_vec((r, d + 1, c), b).unwrap(),
                    v,
                )
                .unwrap();
                (model, Array2::from_shape_vec((4, d), x).unwrap())
            })
    })
}

proptest! {
    #[test]
    fn softmax_ignores_constant_shifts(z in z_vec(6), shift in -500.0..500.0f64) {
        let a = defuzzify(&z, DefuzzVariant::Vanilla).unwrap();
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let b = defuzzify(&shifted, DefuzzVariant::Vanilla).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn firing_levels_are_a_distribution(z in z_vec(7), v in variant()) {
        let f = defuzzify(&z, v).unwrap();
        if v.sums_to_one() {
            prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(f.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        if v == DefuzzVariant::L2Norm {
            prop_assert!((f.iter().map(|p| p * p).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_levels_are_scale_invariant(z in z_vec(5), h in prop::sample::select(vec![0.01, 1.0, 100.0])) {
        for v in [DefuzzVariant::L1Norm, DefuzzVariant::L2Norm, DefuzzVariant::LogTsk] {
            let a = defuzzify_with_eps(&z, v, 0.0).unwrap();
            let scaled: Vec<f64> = z.iter().map(|x| x * h).collect();
            let b = defuzzify_with_eps(&scaled, v, 0.0).unwrap();
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fired_rules_and_average_firing_are_bounded((model, xs) in model_strategy()) {
        let r = model.num_rules() as f64;
        let fired = count_fired_rules(&model, xs.view()).unwrap();
        prop_assert!((0.0..=r).contains(&fired));
        let a = average_firing(&model, xs.view()).unwrap();
        if model.variant().sums_to_one() {
            prop_assert!(fired >= 1.0);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            prop_assert!(a.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact((model, xs) in model_strategy()) {
        let json = Checkpoint::from_model(&model, None, None).unwrap().to_json().unwrap();
        let back = Checkpoint::from_json(&json).unwrap().to_model().unwrap();
        prop_assert_eq!(&back, &model);
        let (pa, sa) = model.predict_batch(xs.view()).unwrap();
        let (pb, sb) = back.predict_batch(xs.view()).unwrap();
        prop_assert_eq!(pa, pb);
        prop_assert_eq!(sa, sb);
    }

    #[test]
    fn zscore_round_trips(rows in 2usize..20, cols in 1usize..5, seed in any::<u64>()) {
        let ds = synth_gaussian(rows, cols, 2, seed, Labeling::Random).unwrap();
        let scaled = Dataset::new(ds.features().mapv(|v| 3.0 * v + 7.0), ds.labels().to_vec(), 2).unwrap();
        let (train, _, stats) = zscore_fit_transform(&scaled, &[]).unwrap();
        let back = stats.inverse_transform(&train).unwrap();
        for (a, b) in back.features().iter().zip(scaled.features().iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let refit = NormStats::fit(&train).unwrap();
        prop_assert!(refit.mean.iter().all(|m| m.abs() < 1e-6));
        prop_assert!(refit.std.iter().all(|s| *s == 0.0 || (s - 1.0).abs() < 1e-4));
    }

    #[test]
    fn split_is_a_deterministic_partition(n in 10usize..300, tf in 0.3..0.95f64, vf in 0.05..0.5f64, seed in any::<u64>()) {
        let spec = SplitSpec { train_fraction: tf, validation_fraction_of_train: vf, seed, allow_empty_test: false };
        if let Ok(idx) = spec.indices(n) {
            let again = spec.indices(n).unwrap();
            prop_assert_eq!(&idx, &again);
            let mut all: Vec<usize> = idx.train.iter().chain(&idx.val).chain(&idx.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let (a, b, c) = spec.sizes(n).unwrap();
            prop_assert_eq!((a, b, c), (idx.train.len(), idx.val.len(), idx.test.len()));
        }
    }

    #[test]
    fn percentiles_are_ordered(values in prop::collection::vec(0.0..1.0f64, 1..60)) {
        let p = Percentiles::of(&values).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= p.p5 && p.p5 <= p.p25 && p.p25 <= p.p50 && p.p50 <= p.p75 && p.p75 <= p.p95 && p.p95 <= hi);
    }
}

#[test]
fn split_does_not_depend_on_anything_but_its_seed() {
    let ds = synth_gaussian(100, 3, 2, 1, Labeling::Random).unwrap();
    let spec = SplitSpec { seed: 42, ..SplitSpec::default() };
    let a = split(&ds, &spec).unwrap();
    let b = split(&ds, &spec).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.test, b.test);
    assert_eq!((a.train.n_samples(), a.val.n_samples(), a.test.n_samples()), (63, 7, 30));
}
