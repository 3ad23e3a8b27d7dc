use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{continue_sgd, ParamVector, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the members of a parameter ensemble are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleStrategy {
    /// The most recent training checkpoints (TracIn-style).
    Checkpoint,
    /// Snapshots of continued SGD from the converged model (GEX-style).
    ExtraSgd,
    /// Random parameter dropout applied to the converged model.
    Dropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub strategy: EnsembleStrategy,
    pub size: usize,
    /// Per-member dropout rate is drawn from `Uniform(lo, hi)`.
    pub dropout: (f64, f64),
    pub extra_sgd_steps: usize,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self::dropout(5, 0.0, 0.01, 0)
    }
}

impl EnsembleSpec {
    pub fn dropout(size: usize, lo: f64, hi: f64, seed: u64) -> Self {
        Self {
            strategy: EnsembleStrategy::Dropout,
            size,
            dropout: (lo, hi),
            extra_sgd_steps: 50,
            seed,
        }
    }

    pub fn checkpoints(size: usize) -> Self {
        Self {
            strategy: EnsembleStrategy::Checkpoint,
            ..Self::dropout(size, 0.0, 0.0, 0)
        }
    }

    pub fn extra_sgd(size: usize, steps: usize, seed: u64) -> Self {
        Self {
            strategy: EnsembleStrategy::ExtraSgd,
            extra_sgd_steps: steps,
            ..Self::dropout(size, 0.0, 0.0, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::arg("ensemble size must be at least 1"));
        }
        let (lo, hi) = self.dropout;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::arg(format!(
                "dropout bounds must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Builds the `spec.size` parameter vectors an ensemble estimate averages over.
///
/// * `Checkpoint` takes the last `size` entries of `checkpoints`.
/// * `ExtraSgd` continues SGD on `ds` for `extra_sgd_steps` steps and keeps
///   `size` evenly spaced snapshots.
/// * `Dropout` copies `theta_final`, draws a rate `r ~ U(lo, hi)` per copy and
///   zeroes each parameter independently with probability `r`. Surviving
///   parameters are not rescaled.
pub fn generate_param_sets<T: Scalar>(
    theta_final: &ParamVector<T>,
    checkpoints: &[ParamVector<T>],
    ds: Option<&Dataset<T>>,
    spec: &EnsembleSpec,
    cfg: Option<&TrainConfig>,
) -> Result<Vec<ParamVector<T>>> {
    spec.validate()?;
    let t = spec.size;
    match spec.strategy {
        EnsembleStrategy::Checkpoint => {
            if checkpoints.len() < t {
                return Err(Error::arg(format!(
                    "checkpoint ensemble of size {t} needs at least {t} checkpoints, got {}",
                    checkpoints.len()
                )));
            }
            Ok(checkpoints[checkpoints.len() - t..].to_vec())
        }
        EnsembleStrategy::ExtraSgd => {
            let (ds, cfg) = match (ds, cfg) {
                (Some(ds), Some(cfg)) => (ds, cfg),
                _ => {
                    return Err(Error::arg(
                        "extra-SGD ensemble requires the training set and a train config",
                    ))
                }
            };
            let steps = spec.extra_sgd_steps;
            if steps < t {
                return Err(Error::arg(format!(
                    "extra-SGD ensemble of size {t} needs at least {t} steps, got {steps}"
                )));
            }
            let marks: Vec<usize> = (1..=t).map(|k| (k * steps).div_ceil(t)).collect();
            let mut out = Vec::with_capacity(t);
            continue_sgd(theta_final, ds, &cfg.with_seed(spec.seed), steps, |step, theta| {
                if marks.contains(&step) {
                    out.push(theta.clone());
                }
            })?;
            Ok(out)
        }
        EnsembleStrategy::Dropout => {
            let (lo, hi) = spec.dropout;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..t)
                .map(|_| {
                    let rate = if hi > lo { rng.random_range(lo..hi) } else { lo };
                    let values = theta_final
                        .values()
                        .iter()
                        .map(|&v| {
                            if rng.random::<f64>() < rate {
                                T::zero()
                            } else {
                                v
                            }
                        })
                        .collect();
                    theta_final.with_values(values)
                })
                .collect()
        }
    }
}
