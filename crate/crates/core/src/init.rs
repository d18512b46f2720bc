//! Parameter initialization: k-means rule centers, Gaussian widths around
//! `h`, He-initialized consequents.

use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, TskError};
use crate::model::{DefuzzVariant, TskModel, SIGMA_MIN};
use crate::rng::{rng_from_seed, substream, substream_indexed, TskRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    /// Mean of the initial widths.
    pub h: f64,
    /// Standard deviation of the initial widths.
    pub sigma_spread: f64,
    pub kmeans_iters: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            h: 1.0,
            sigma_spread: 0.2,
            kmeans_iters: 100,
            kmeans_restarts: 10,
            seed: 0,
        }
    }
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(TskError::Config(format!("h must be positive, got {}", self.h)));
        }
        if !(self.sigma_spread >= 0.0 && self.sigma_spread.is_finite()) {
            return Err(TskError::Config(format!(
                "sigma_spread must be non-negative, got {}",
                self.sigma_spread
            )));
        }
        if self.kmeans_iters == 0 || self.kmeans_restarts == 0 {
            return Err(TskError::Config(
                "kmeans_iters and kmeans_restarts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: each new center is drawn with probability
/// proportional to the squared distance to the nearest chosen center.
/// `xs` must be in standard layout.
fn plus_plus(xs: &ArrayView2<'_, f64>, k: usize, rng: &mut TskRng) -> Array2<f64> {
    let (n, d) = xs.dim();
    let mut centers = Array2::zeros((k, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&xs.row(first));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(xs.row(i).as_slice().expect("standard layout"), centers.row(0).as_slice().unwrap()))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // rounding can walk past the end onto a zero-weight point
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&xs.row(pick));
        let cr = centers.row(c).to_vec();
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(sq_dist(xs.row(i).as_slice().expect("standard layout"), &cr));
        }
    }
    centers
}

fn assign(xs: &ArrayView2<'_, f64>, centers: &Array2<f64>, out: &mut [usize], dist: &mut [f64]) -> bool {
    let mut changed = false;
    let mut buf = Vec::new();
    for (i, x) in xs.rows().into_iter().enumerate() {
        let x = match x.as_slice() {
            Some(s) => s,
            None => {
                buf.clear();
                buf.extend(x.iter().copied());
                &buf[..]
            }
        };
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.rows().into_iter().enumerate() {
            let dd = sq_dist(x, center.as_slice().expect("standard layout"));
            if dd < best_d {
                best_d = dd;
                best = c;
            }
        }
        if out[i] != best {
            changed = true;
            out[i] = best;
        }
        dist[i] = best_d;
    }
    changed
}

/// Lloyd iterations from the given starting centers.
///
/// A cluster that ends up empty is reseeded at the point farthest from its
/// nearest center; that point is then excluded from further reseeds in the
/// same iteration.
pub fn lloyd(xs: ArrayView2<'_, f64>, initial: Array2<f64>, max_iters: usize) -> KMeansFit {
    let (n, d) = xs.dim();
    let k = initial.nrows();
    let mut centers = initial.as_standard_layout().into_owned();
    let mut assignments = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut iterations = 0;

    assign(&xs, &centers, &mut assignments, &mut dist);
    while iterations < max_iters {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, x) in xs.rows().into_iter().enumerate() {
            let c = assignments[i];
            counts[c] += 1;
            sums.row_mut(c).zip_mut_with(&x, |s, &v| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centers.row_mut(c).assign(&sums.row(c).mapv(|v| v * inv));
            } else {
                let far = dist
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0;
                centers.row_mut(c).assign(&xs.row(far));
                dist[far] = 0.0;
            }
        }
        if !assign(&xs, &centers, &mut assignments, &mut dist) {
            break;
        }
    }
    let inertia = dist.iter().sum();
    KMeansFit {
        centers,
        assignments,
        inertia,
        iterations,
    }
}

/// k-means++ seeded Lloyd's algorithm, best of `restarts` by inertia.
///
/// Restarts run in parallel on independent seeded streams; ties in inertia
/// go to the lowest restart index, so the result does not depend on
/// scheduling.
pub fn kmeans(xs: ArrayView2<'_, f64>, k: usize, max_iters: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    let n = xs.nrows();
    if k == 0 {
        return Err(TskError::Config("number of clusters must be positive".into()));
    }
    if n < k {
        return Err(TskError::Config(format!(
            "{n} samples cannot seed {k} clusters"
        )));
    }
    let xs = xs.as_standard_layout();
    let fits: Vec<KMeansFit> = (0..restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(substream_indexed(seed, "restart", &[i as u64]));
            let start = plus_plus(&xs.view(), k, &mut rng);
            lloyd(xs.view(), start, max_iters)
        })
        .collect();
    Ok(fits
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.inertia.total_cmp(&b.inertia).then(ia.cmp(ib)))
        .map(|(_, f)| f)
        .expect("at least one restart"))
}

/// Rule centers from k-means on the (already normalized) training features.
pub fn kmeans_centers(train: &Dataset, rules: usize, spec: &InitSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    if train.n_samples() < rules {
        return Err(TskError::Config(format!(
            "{} training samples are fewer than the {rules} requested rules",
            train.n_samples()
        )));
    }
    let fit = kmeans(
        train.features(),
        rules,
        spec.kmeans_iters,
        spec.kmeans_restarts,
        substream(spec.seed, "kmeans"),
    )?;
    Ok(fit.centers)
}

/// Draws `count` widths from N(h, spread^2), stored as `max(|draw|, SIGMA_MIN)`.
pub fn sample_widths(count: usize, h: f64, spread: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let draw = h + spread * rng.sample::<f64, _>(StandardNormal);
            draw.abs().max(SIGMA_MIN)
        })
        .collect()
}

/// Builds a model from k-means centers, N(h, spread) widths and He-initialized
/// consequents (zero mean, standard deviation `sqrt(2 / (D + 1))`, bias included).
pub fn init_model(train: &Dataset, rules: usize, variant: DefuzzVariant, spec: &InitSpec) -> Result<TskModel> {
    let centers = kmeans_centers(train, rules, spec)?;
    let (d, c) = (train.dim(), train.num_classes());
    let widths = Array2::from_shape_vec(
        (rules, d),
        sample_widths(rules * d, spec.h, spec.sigma_spread, substream(spec.seed, "widths")),
    )
    .expect("R*D widths");
    let he = Normal::new(0.0, (2.0 / (d as f64 + 1.0)).sqrt()).expect("positive stdev");
    let mut rng = rng_from_seed(substream(spec.seed, "consequents"));
    let consequents = Array3::from_shape_simple_fn((rules, d + 1, c), || he.sample(&mut rng));
    TskModel::new(centers, widths, consequents, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs(n_per: usize, seed: u64) -> (Array2<f64>, [f64; 2], [f64; 2]) {
        let mut rng = rng_from_seed(seed);
        let mut xs = Array2::zeros((2 * n_per, 2));
        for (i, mut r) in xs.rows_mut().into_iter().enumerate() {
            let shift = if i < n_per { 5.0 } else { -5.0 };
            r[0] = shift + rng.sample::<f64, _>(StandardNormal);
            r[1] = rng.sample::<f64, _>(StandardNormal);
        }
        let mean = |lo: usize, hi: usize, c: usize| xs.slice(ndarray::s![lo..hi, c]).mean().unwrap();
        let a = [mean(0, n_per, 0), mean(0, n_per, 1)];
        let b = [mean(n_per, 2 * n_per, 0), mean(n_per, 2 * n_per, 1)];
        (xs, a, b)
    }

    #[test]
    fn two_blobs_recover_their_means() {
        let (xs, a, b) = blobs(500, 3);
        let fit = kmeans(xs.view(), 2, 100, 3, 1).unwrap();
        let mut centers: Vec<Vec<f64>> = fit.centers.rows().into_iter().map(|r| r.to_vec()).collect();
        centers.sort_by(|p, q| q[0].total_cmp(&p[0]));
        for (c, truth) in centers.iter().zip([a, b]) {
            assert!((c[0] - truth[0]).abs() < 0.1 && (c[1] - truth[1]).abs() < 0.1, "{c:?} vs {truth:?}");
        }
    }

    #[test]
    fn k_equal_n_reproduces_the_points() {
        let xs = array![[0.0, 1.0], [2.0, -1.0], [5.0, 5.0], [-3.0, 0.5]];
        let fit = kmeans(xs.view(), 4, 50, 2, 9).unwrap();
        assert_eq!(fit.inertia, 0.0);
        let mut got: Vec<Vec<f64>> = fit.centers.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut want: Vec<Vec<f64>> = xs.rows().into_iter().map(|r| r.to_vec()).collect();
        got.sort_by(|p, q| p.partial_cmp(q).unwrap());
        want.sort_by(|p, q| p.partial_cmp(q).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn empty_cluster_is_reseeded_at_farthest_point() {
        let xs = array![[0.0], [0.1], [0.2], [10.0]];
        // third center attracts nothing
        let start = array![[0.1], [10.0], [100.0]];
        let fit = lloyd(xs.view(), start, 1);
        // farthest point from its nearest center was 0.0 or 0.2 (distance 0.1 to 0.1)
        // ties go to the first index
        assert_eq!(fit.centers[[2, 0]], 0.0);
        assert!(fit.assignments.iter().all(|&a| a < 3));
    }

    #[test]
    fn too_few_samples_is_config_error() {
        let xs = Array2::zeros((3, 2));
        let ds = Dataset::new(xs, vec![0, 1, 0], 2).unwrap();
        assert!(matches!(
            kmeans_centers(&ds, 4, &InitSpec::default()),
            Err(TskError::Config(_))
        ));
    }

    #[test]
    fn kmeans_is_deterministic() {
        let (xs, _, _) = blobs(60, 8);
        let a = kmeans(xs.view(), 5, 100, 4, 77).unwrap();
        let b = kmeans(xs.view(), 5, 100, 4, 77).unwrap();
        assert_eq!(a, b);
    }

    fn small_dataset() -> Dataset {
        let (xs, _, _) = blobs(20, 4);
        let labels = (0..40).map(|i| i % 2).collect();
        Dataset::new(xs, labels, 2).unwrap()
    }

    #[test]
    fn init_model_is_deterministic() {
        let ds = small_dataset();
        let spec = InitSpec { seed: 5, ..InitSpec::default() };
        let a = init_model(&ds, 3, DefuzzVariant::Htsk, &spec).unwrap();
        let b = init_model(&ds, 3, DefuzzVariant::Htsk, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.params_finite());
        assert!(a.widths().iter().all(|&s| s >= SIGMA_MIN));
    }

    #[test]
    fn zero_spread_gives_exact_h() {
        let ds = small_dataset();
        let spec = InitSpec { h: 1.0, sigma_spread: 0.0, ..InitSpec::default() };
        let m = init_model(&ds, 2, DefuzzVariant::Vanilla, &spec).unwrap();
        assert!(m.widths().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn width_sampler_mean() {
        let w = sample_widths(10_000, 5.0, 0.2, 13);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        // standard error is 0.002, so 0.02 is ten of them
        assert!((mean - 5.0).abs() < 0.02, "{mean}");
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        assert!((var.sqrt() - 0.2).abs() < 0.01);
    }

    #[test]
    fn widths_are_clamped_and_positive() {
        let w = sample_widths(1000, 0.1, 0.2, 2);
        assert!(w.iter().all(|&s| s >= SIGMA_MIN));
    }

    #[test]
    fn he_consequent_scale() {
        let ds = Dataset::new(Array2::from_shape_fn((40, 49), |(i, j)| ((i * 7 + j * 3) % 11) as f64), (0..40).map(|i| i % 2).collect(), 2).unwrap();
        let m = init_model(&ds, 4, DefuzzVariant::Vanilla, &InitSpec { kmeans_restarts: 1, ..InitSpec::default() }).unwrap();
        let b = m.consequents();
        let var = b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64;
        // 400 draws with variance 2/50
        assert!((var - 0.04).abs() < 0.01, "{var}");
    }
}
