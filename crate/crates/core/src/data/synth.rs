use std::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, NoiseRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Two isotropic unit-variance Gaussian clusters whose centers sit at
/// `∓separation/2` on the first axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobsConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub separation: f64,
    pub seed: u64,
}

impl BlobsConfig {
    /// Center distance used when none is given.
    pub const DEFAULT_SEPARATION: f64 = 6.0;

    pub fn new(n_train: usize, n_test: usize, separation: f64, seed: u64) -> Self {
        Self {
            n_train,
            n_test,
            n_features: 2,
            separation,
            seed,
        }
    }

    /// Draws the train and test splits. Points are rejection-sampled so each
    /// lies strictly on its own class's side of the bisecting hyperplane
    /// `x0 = 0`; the clusters are therefore linearly separable for any
    /// positive separation.
    pub fn generate<T: Scalar>(&self) -> Result<(Dataset<T>, Dataset<T>)> {
        if self.n_train == 0 {
            return Err(Error::arg("make_blobs: n_train must be positive"));
        }
        if self.n_features == 0 {
            return Err(Error::arg("make_blobs: n_features must be positive"));
        }
        if !(self.separation > 0.0) || !self.separation.is_finite() {
            return Err(Error::arg(format!(
                "make_blobs: separation must be positive, got {}",
                self.separation
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let train = self.draw(&mut rng, self.n_train)?;
        let test = self.draw(&mut rng, self.n_test)?;
        Ok((train, test))
    }

    fn draw<T: Scalar>(&self, rng: &mut ChaCha8Rng, n: usize) -> Result<Dataset<T>> {
        let d = self.n_features;
        let half = self.separation / 2.0;
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let sign = if label == 1 { 1.0 } else { -1.0 };
            let x0 = loop {
                let v: f64 = sign * half + rng.sample::<f64, _>(StandardNormal);
                if v * sign > 0.0 {
                    break v;
                }
            };
            features.push(T::c(x0));
            for _ in 1..d {
                features.push(T::c(rng.sample::<f64, _>(StandardNormal)));
            }
            labels.push(label);
        }
        Dataset::with_sequential_ids(features, d, labels, None)
    }
}

/// Two-dimensional, linearly separable blobs (see [`BlobsConfig`]).
pub fn make_blobs<T: Scalar>(
    n_train: usize,
    n_test: usize,
    separation: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    BlobsConfig::new(n_train, n_test, separation, seed).generate()
}

/// Half-moon noise level used when none is given.
pub const DEFAULT_MOONS_NOISE: f64 = 0.1;

/// Interleaving half circles. Class 0 lies on the upper unit semicircle,
/// class 1 on the lower semicircle centered at `(1, 0.5)`; each point gets
/// isotropic Gaussian noise of standard deviation `noise_std`.
pub fn make_half_moons<T: Scalar>(
    n_train: usize,
    n_test: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::arg(format!(
            "make_half_moons: noise_std must be non-negative, got {noise_std}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Result<Dataset<T>> {
        let mut features = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let t = rng.random::<f64>() * PI;
            let (mut x, mut y) = if label == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            if noise_std > 0.0 {
                x += noise_std * rng.sample::<f64, _>(StandardNormal);
                y += noise_std * rng.sample::<f64, _>(StandardNormal);
            }
            features.push(T::c(x));
            features.push(T::c(y));
            labels.push(label);
        }
        Dataset::with_sequential_ids(features, 2, labels, None)
    };
    let train = draw(n_train)?;
    let test = draw(n_test)?;
    Ok((train, test))
}

/// Flips `k` labels chosen uniformly without replacement, or `k` per class
/// when `per_class` is set.
pub fn flip_labels<T: Scalar>(
    ds: &Dataset<T>,
    k: usize,
    per_class: bool,
    seed: u64,
) -> Result<(Dataset<T>, NoiseRecord)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = Vec::new();
    if per_class {
        for class in [0u8, 1] {
            let members: Vec<usize> = (0..ds.len())
                .filter(|&i| ds.labels()[i] == class)
                .collect();
            if k > members.len() {
                return Err(Error::arg(format!(
                    "flip_labels: {k} flips requested but class {class} has {} samples",
                    members.len()
                )));
            }
            rows.extend(
                index::sample(&mut rng, members.len(), k)
                    .into_iter()
                    .map(|j| members[j]),
            );
        }
    } else {
        if k > ds.len() {
            return Err(Error::arg(format!(
                "flip_labels: {k} flips requested but dataset has {} samples",
                ds.len()
            )));
        }
        rows.extend(index::sample(&mut rng, ds.len(), k));
    }

    let mut labels = ds.labels().to_vec();
    let mut record = NoiseRecord::default();
    for r in rows {
        let id = ds.ids()[r];
        record.flipped_ids.insert(id);
        record.original_labels.insert(id, labels[r]);
        labels[r] = 1 - labels[r];
    }
    Ok((ds.with_labels(labels)?, record))
}

/// Synthetic tabular task whose labels depend on a binary sensitive group.
///
/// Features are `[x0, x1, s]`: two standard normal covariates and the group
/// coded as `s = 2g − 1 ∈ {−1, 1}`, so a fitted model can (and does) pick up
/// the group. The symmetric coding keeps the group column from being nearly
/// collinear with the intercept.
/// The minority group `g = 1` has prevalence `minority_frac` and receives a
/// positive label shift of `bias`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupBiasConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub minority_frac: f64,
    pub bias: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl GroupBiasConfig {
    /// Index of the feature column carrying the group indicator.
    pub const GROUP_FEATURE: usize = 2;

    pub fn new(n_train: usize, n_val: usize, n_test: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_val,
            n_test,
            minority_frac: 0.3,
            bias: 1.5,
            label_noise: 0.5,
            seed,
        }
    }
}

/// Train / validation / test splits of the group-biased task. Ids are unique
/// across the three splits.
pub fn make_group_biased<T: Scalar>(
    cfg: &GroupBiasConfig,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    if cfg.n_train == 0 || cfg.n_val == 0 {
        return Err(Error::arg("make_group_biased: train and validation must be non-empty"));
    }
    if !(0.0..=1.0).contains(&cfg.minority_frac) || cfg.label_noise < 0.0 {
        return Err(Error::arg(
            "make_group_biased: minority_frac must lie in [0,1] and label_noise be non-negative",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |n: usize| -> Result<Dataset<T>> {
        let mut features = Vec::with_capacity(3 * n);
        let mut labels = Vec::with_capacity(n);
        let mut group = Vec::with_capacity(n);
        for _ in 0..n {
            let g = u8::from(rng.random::<f64>() < cfg.minority_frac);
            let x0: f64 = rng.sample(StandardNormal);
            let x1: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            let s = 1.5 * x0 + 0.5 * x1 + cfg.bias * (f64::from(g) - 0.5) + cfg.label_noise * eps;
            features.extend([T::c(x0), T::c(x1), T::c(2.0 * f64::from(g) - 1.0)]);
            labels.push(u8::from(s > 0.0));
            group.push(g);
        }
        Dataset::with_sequential_ids(features, 3, labels, Some(group))
    };
    let train = draw(cfg.n_train)?;
    let val = draw(cfg.n_val)?.offset_ids(cfg.n_train as u64);
    let test = draw(cfg.n_test)?.offset_ids((cfg.n_train + cfg.n_val) as u64);
    Ok((train, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn original_labels_of(record: &NoiseRecord) -> BTreeMap<u8, usize> {
        let mut out = BTreeMap::new();
        for l in record.original_labels.values() {
            *out.entry(*l).or_insert(0) += 1;
        }
        out
    }

    #[test]
    fn blobs_have_requested_shape_and_balance() {
        let (tr, te) = make_blobs::<f64>(150, 100, 4.0, 7).unwrap();
        assert_eq!(tr.len(), 150);
        assert_eq!(te.len(), 100);
        assert_eq!(tr.n_features(), 2);
        let [c0, c1] = tr.class_counts();
        assert!(c0.abs_diff(c1) <= 1);
    }

    #[test]
    fn blobs_reject_bad_arguments() {
        assert!(make_blobs::<f64>(0, 10, 4.0, 1).is_err());
        assert!(make_blobs::<f64>(10, 10, 0.0, 1).is_err());
        assert!(make_blobs::<f64>(10, 10, -1.0, 1).is_err());
    }

    #[test]
    fn blobs_are_separated_by_the_bisector() {
        let (tr, _) = make_blobs::<f64>(500, 0, 0.5, 3).unwrap();
        for s in tr.samples() {
            assert_eq!(s.x[0] > 0.0, s.y == 1);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            make_blobs::<f64>(40, 10, 3.0, 11).unwrap(),
            make_blobs::<f64>(40, 10, 3.0, 11).unwrap()
        );
        assert_eq!(
            make_half_moons::<f64>(40, 10, 0.1, 11).unwrap(),
            make_half_moons::<f64>(40, 10, 0.1, 11).unwrap()
        );
        assert_ne!(
            make_half_moons::<f64>(40, 10, 0.1, 11).unwrap().0,
            make_half_moons::<f64>(40, 10, 0.1, 12).unwrap().0
        );
    }

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let (tr, te) = make_half_moons::<f64>(200, 100, 0.0, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (200, 100));
        for s in tr.samples() {
            if s.y == 0 {
                let r = (s.x[0] * s.x[0] + s.x[1] * s.x[1]).sqrt();
                assert!((r - 1.0).abs() < 1e-12);
                assert!(s.x[1] >= -1e-12);
            } else {
                let (dx, dy) = (s.x[0] - 1.0, s.x[1] - 0.5);
                assert!(((dx * dx + dy * dy).sqrt() - 1.0).abs() < 1e-12);
                assert!(dy <= 1e-12);
            }
        }
    }

    #[test]
    fn moons_reject_negative_noise() {
        assert!(make_half_moons::<f64>(10, 10, -0.1, 0).is_err());
        assert!(make_half_moons::<f64>(0, 0, 0.1, 0).unwrap().0.is_empty());
    }

    #[test]
    fn flip_labels_changes_exactly_the_recorded_ids() {
        let (tr, _) = make_blobs::<f64>(150, 0, 4.0, 1).unwrap();
        let (noisy, rec) = flip_labels(&tr, 10, false, 9).unwrap();
        assert_eq!(rec.len(), 10);
        rec.validate(&noisy).unwrap();
        assert_eq!(noisy.features(), tr.features());
        for i in 0..tr.len() {
            let changed = noisy.labels()[i] != tr.labels()[i];
            assert_eq!(changed, rec.contains(&tr.ids()[i]));
        }
    }

    #[test]
    fn flip_labels_zero_is_noop() {
        let (tr, _) = make_blobs::<f64>(20, 0, 4.0, 1).unwrap();
        let (noisy, rec) = flip_labels(&tr, 0, false, 9).unwrap();
        assert_eq!(noisy, tr);
        assert!(rec.is_empty());
    }

    #[test]
    fn flip_labels_per_class() {
        let (tr, _) = make_half_moons::<f64>(200, 0, 0.1, 1).unwrap();
        let (noisy, rec) = flip_labels(&tr, 10, true, 2).unwrap();
        assert_eq!(rec.len(), 20);
        rec.validate(&noisy).unwrap();
        let by_class = original_labels_of(&rec);
        assert_eq!(by_class.get(&0), Some(&10));
        assert_eq!(by_class.get(&1), Some(&10));
        assert!(flip_labels(&tr, 101, true, 2).is_err());
        assert!(flip_labels(&tr, 201, false, 2).is_err());
    }

    #[test]
    fn group_biased_splits_have_unique_ids_and_gap() {
        let cfg = GroupBiasConfig::new(300, 100, 100, 4);
        let (tr, va, te) = make_group_biased::<f64>(&cfg).unwrap();
        assert_eq!(tr.ids()[0].0, 0);
        assert_eq!(va.ids()[0].0, 300);
        assert_eq!(te.ids()[0].0, 400);
        let g = tr.group().unwrap();
        let rate = |grp: u8| {
            let idx: Vec<usize> = (0..tr.len()).filter(|&i| g[i] == grp).collect();
            idx.iter().filter(|&&i| tr.labels()[i] == 1).count() as f64 / idx.len() as f64
        };
        assert!(rate(1) > rate(0));
        for i in 0..tr.len() {
            assert_eq!(tr.row(i)[GroupBiasConfig::GROUP_FEATURE], 2.0 * f64::from(g[i]) - 1.0);
        }
    }
}
