//! Influence estimators.
//!
//! Every estimator scores a training sample `z_i` by pairing its loss gradient
//! `g_i` with a target direction derived from a validation set:
//!
//! * inner product (IP): `score_i = t · g_i`,
//! * exact: `score_i = tᵀ (H + λI)⁻¹ g_i` for the convex model,
//! * LiSSA: the same with a Neumann-series estimate of `(H + λI)⁻¹ t`,
//!
//! where `t` is the summed validation loss gradient (utility and robustness)
//! or the gradient of the demographic-parity gap (fairness). Under all of
//! them a low score marks a detrimental sample, except self-influence whose
//! polarity is inverted.

mod exact;
mod ip;
mod lissa;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::SampleId;
use crate::error::{Error, Result};
use crate::models::{EnsembleSpec, EnsembleStrategy};
use crate::scalar::Scalar;

pub use exact::{exact_influence, exact_influence_for};
pub use ip::{
    dp_gap_gradient, ensemble_influence, ip_fairness, ip_influence, ip_robustness, ip_utility,
    objective_gradient, self_influence, training_gradients,
};
pub use lissa::{
    lissa_ihvp, lissa_influence, lissa_solve, DiagonalOperator, HessianOperator,
    LissaConfig, LogisticHessianOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Exact,
    Ip,
    IpFair,
    IpRobust,
    SelfIp,
    Lissa,
    /// Mean IP over training checkpoints.
    TracIn,
    /// Mean IP over snapshots of continued SGD.
    Gex,
    /// Mean IP over dropout-perturbed copies of the converged model.
    IpEnsemble,
}

impl Method {
    /// Whether a high score, rather than a low one, marks a detrimental sample.
    pub fn high_is_detrimental(self) -> bool {
        matches!(self, Method::SelfIp)
    }

    pub fn for_ensemble(strategy: EnsembleStrategy) -> Self {
        match strategy {
            EnsembleStrategy::Checkpoint => Method::TracIn,
            EnsembleStrategy::ExtraSgd => Method::Gex,
            EnsembleStrategy::Dropout => Method::IpEnsemble,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "EXACT",
            Method::Ip => "IP",
            Method::IpFair => "IP_FAIR",
            Method::IpRobust => "IP_ROBUST",
            Method::SelfIp => "SELF_IP",
            Method::Lissa => "LISSA",
            Method::TracIn => "TRACIN",
            Method::Gex => "GEX",
            Method::IpEnsemble => "IP_ENSEMBLE",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        [
            Method::Exact,
            Method::Ip,
            Method::IpFair,
            Method::IpRobust,
            Method::SelfIp,
            Method::Lissa,
            Method::TracIn,
            Method::Gex,
            Method::IpEnsemble,
        ]
        .into_iter()
        .find(|m| m.name() == key)
        .ok_or_else(|| Error::arg(format!("unknown influence method `{s}`")))
    }
}

/// Quantity whose change the influence score measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Summed validation loss.
    Utility,
    /// Demographic-parity gap on the validation set.
    Fairness,
    /// Summed loss on an adversarially perturbed validation set.
    Robustness,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Utility => "utility",
            Objective::Fairness => "fairness",
            Objective::Robustness => "robustness",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "utility" => Ok(Objective::Utility),
            "fairness" => Ok(Objective::Fairness),
            "robustness" => Ok(Objective::Robustness),
            other => Err(Error::arg(format!("unknown objective `{other}`"))),
        }
    }
}

/// Per-sample influence scores with the provenance needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceReport<T> {
    pub method: Method,
    pub objective: Objective,
    pub scores: BTreeMap<SampleId, T>,
    pub ensemble: Option<EnsembleSpec>,
    pub model_fingerprint: String,
    pub seed: Option<u64>,
}

impl<T: Scalar> InfluenceReport<T> {
    pub fn new(
        method: Method,
        objective: Objective,
        scores: BTreeMap<SampleId, T>,
        model_fingerprint: String,
    ) -> Result<Self> {
        if let Some((id, _)) = scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!("influence score of sample {id} is not finite")));
        }
        Ok(Self {
            method,
            objective,
            scores,
            ensemble: None,
            model_fingerprint,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, id: &SampleId) -> Option<T> {
        self.scores.get(id).copied()
    }

    /// Scores in ascending id order.
    pub fn values(&self) -> Vec<T> {
        self.scores.values().copied().collect()
    }

    /// Scores oriented so that higher always means more beneficial.
    pub fn benefit_scores(&self) -> BTreeMap<SampleId, T> {
        if self.method.high_is_detrimental() {
            self.scores.iter().map(|(k, v)| (*k, -*v)).collect()
        } else {
            self.scores.clone()
        }
    }

    pub fn same_ids(&self, other: &InfluenceReport<T>) -> bool {
        self.scores.len() == other.scores.len()
            && self.scores.keys().zip(other.scores.keys()).all(|(a, b)| a == b)
    }

    pub fn with_ensemble(mut self, spec: Option<EnsembleSpec>) -> Self {
        self.ensemble = spec;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }
}
