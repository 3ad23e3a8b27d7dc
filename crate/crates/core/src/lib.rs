//! Influence estimation for training-data curation.
//!
//! Scores every training sample by how its loss gradient aligns with a
//! validation objective (utility, demographic-parity fairness or adversarial
//! robustness), with an exact damped-Hessian oracle and a LiSSA estimator for
//! the convex model, parameter ensembles, and trim / relabel / reweight
//! curation pipelines.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for common use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod curation;
pub mod data;
mod error;
pub mod influence;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod pipeline;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{sigmoid, softplus, Scalar};

pub use curation::{CurationAction, CurationPlan};
pub use data::{NoiseRecord, SampleId};
pub use influence::{LissaConfig, Method, Objective};
pub use metrics::EvalRecord;
pub use models::{Activation, Arch, EnsembleSpec, EnsembleStrategy, TrainConfig};

pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type ParamVector64 = models::ParamVector<f64>;
pub type ParamVector32 = models::ParamVector<f32>;
pub type GradientVector64 = models::GradientVector<f64>;
pub type GradientVector32 = models::GradientVector<f32>;
pub type HessianMatrix64 = models::HessianMatrix<f64>;
pub type HessianMatrix32 = models::HessianMatrix<f32>;
pub type InfluenceReport64 = influence::InfluenceReport<f64>;
pub type InfluenceReport32 = influence::InfluenceReport<f32>;
pub type CurationPlan64 = curation::CurationPlan<f64>;
pub type CurationPlan32 = curation::CurationPlan<f32>;
