use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{net, Arch, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Mini-batch SGD settings. The objective is the (optionally weighted) mean
/// cross-entropy plus `weight_decay/2 · ‖θ‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub checkpoint_stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            weight_decay: 1e-3,
            checkpoint_stride: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::arg("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be positive"));
        }
        if self.checkpoint_stride == 0 {
            return Err(Error::arg("checkpoint stride must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::arg("weight decay must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub params: ParamVector<T>,
    /// Parameters after every `checkpoint_stride` epochs, ending with the
    /// final parameters.
    pub checkpoints: Vec<ParamVector<T>>,
}

/// Fan-in scaled uniform initialization, biases at zero.
pub fn init_params<T: Scalar>(arch: &Arch, seed: u64) -> Result<ParamVector<T>> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a17);
    let mut values = Vec::with_capacity(arch.param_count());
    for (fan_in, fan_out) in arch.layer_dims() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(T::c(rng.random_range(-bound..bound)));
        }
        values.extend(std::iter::repeat_n(T::zero(), fan_out));
    }
    ParamVector::new(arch.clone(), values)
}

pub fn train<T: Scalar>(ds: &Dataset<T>, arch: &Arch, cfg: &TrainConfig) -> Result<TrainOutput<T>> {
    train_weighted(ds, arch, cfg, None)
}

/// Mini-batch SGD from a seeded initialization. `weights`, when given, scale
/// each sample's loss and are aligned with the rows of `ds`.
pub fn train_weighted<T: Scalar>(
    ds: &Dataset<T>,
    arch: &Arch,
    cfg: &TrainConfig,
    weights: Option<&[T]>,
) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    check_training_set(ds, arch, weights)?;
    let mut theta = init_params::<T>(arch, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut checkpoints = Vec::new();
    if cfg.epochs == 0 {
        checkpoints.push(theta.clone());
    }
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            sgd_step(&mut theta, ds, batch, cfg, weights)?;
        }
        if epoch % cfg.checkpoint_stride == 0 || epoch == cfg.epochs {
            checkpoints.push(theta.clone());
        }
    }
    Ok(TrainOutput {
        params: theta,
        checkpoints,
    })
}

/// Runs `steps` further mini-batch updates from `start`, calling `on_step`
/// with the 1-based step index and the current parameters after each one.
pub fn continue_sgd<T: Scalar, F>(
    start: &ParamVector<T>,
    ds: &Dataset<T>,
    cfg: &TrainConfig,
    steps: usize,
    mut on_step: F,
) -> Result<ParamVector<T>>
where
    F: FnMut(usize, &ParamVector<T>),
{
    cfg.validate()?;
    check_training_set(ds, start.arch(), None)?;
    let mut theta = start.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut cursor = order.len();
    for step in 1..=steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        sgd_step(&mut theta, ds, &order[cursor..end], cfg, None)?;
        cursor = end;
        on_step(step, &theta);
    }
    Ok(theta)
}

fn check_training_set<T: Scalar>(ds: &Dataset<T>, arch: &Arch, weights: Option<&[T]>) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    if ds.n_features() != arch.input_dim() {
        return Err(Error::Shape {
            expected: arch.input_dim(),
            found: ds.n_features(),
        });
    }
    if let Some(w) = weights {
        if w.len() != ds.len() {
            return Err(Error::Shape {
                expected: ds.len(),
                found: w.len(),
            });
        }
        if w.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::arg("sample weights must be finite and non-negative"));
        }
    }
    Ok(())
}

fn sgd_step<T: Scalar>(
    theta: &mut ParamVector<T>,
    ds: &Dataset<T>,
    batch: &[usize],
    cfg: &TrainConfig,
    weights: Option<&[T]>,
) -> Result<()> {
    let mut grad = vec![T::zero(); theta.len()];
    for &i in batch {
        let g = net::per_sample_grad(theta, ds.sample(i))?;
        let w = weights.map_or(T::one(), |w| w[i]);
        linalg::axpy(w, &g.values, &mut grad);
    }
    let inv = T::one() / T::from_usize_lossy(batch.len());
    let lr = T::c(cfg.learning_rate);
    let wd = T::c(cfg.weight_decay);
    for (p, g) in theta.values_mut().iter_mut().zip(&grad) {
        *p -= lr * (*g * inv + wd * *p);
    }
    if theta.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SGD produced non-finite parameters".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;

    #[test]
    fn zero_epochs_returns_init() {
        let (tr, _) = make_blobs::<f64>(20, 0, 4.0, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&tr, &Arch::linear(2), &cfg).unwrap();
        let init = init_params::<f64>(&Arch::linear(2), cfg.seed).unwrap();
        assert_eq!(out.params, init);
        assert_eq!(out.checkpoints, vec![init]);
    }

    #[test]
    fn checkpoints_follow_stride_and_end_with_final() {
        let (tr, _) = make_blobs::<f64>(20, 0, 4.0, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 25,
            checkpoint_stride: 10,
            ..TrainConfig::default()
        };
        let out = train(&tr, &Arch::linear(2), &cfg).unwrap();
        assert_eq!(out.checkpoints.len(), 3);
        assert_eq!(out.checkpoints.last().unwrap(), &out.params);
    }

    #[test]
    fn training_is_deterministic() {
        let (tr, _) = make_blobs::<f64>(60, 0, 4.0, 2).unwrap();
        let cfg = TrainConfig::default();
        let a = train(&tr, &Arch::mlp_default(2), &TrainConfig { epochs: 5, ..cfg.clone() }).unwrap();
        let b = train(&tr, &Arch::mlp_default(2), &TrainConfig { epochs: 5, ..cfg }).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn invalid_configs_and_inputs() {
        let (tr, _) = make_blobs::<f64>(20, 0, 4.0, 1).unwrap();
        let arch = Arch::linear(2);
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(&tr, &arch, &bad).is_err());
        let bad = TrainConfig {
            checkpoint_stride: 0,
            ..TrainConfig::default()
        };
        assert!(train(&tr, &arch, &bad).is_err());
        assert!(train(&tr, &Arch::linear(3), &TrainConfig::default()).is_err());
        let empty = tr.select(&[]);
        assert!(train(&empty, &arch, &TrainConfig::default()).is_err());
        let w = vec![1.0; 3];
        assert!(train_weighted(&tr, &arch, &TrainConfig::default(), Some(&w)).is_err());
    }

    #[test]
    fn zero_weights_ignore_samples() {
        let (tr, _) = make_blobs::<f64>(40, 0, 4.0, 1).unwrap();
        let (noisy, _) = crate::data::flip_labels(&tr, 0, false, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 40,
            ..TrainConfig::default()
        };
        let mut w = vec![1.0; 40];
        w[0] = 0.0;
        let weighted = train_weighted(&noisy, &Arch::linear(2), &cfg, Some(&w)).unwrap();
        let plain = train(&noisy, &Arch::linear(2), &cfg).unwrap();
        assert_ne!(weighted.params, plain.params);
    }
}
