use super::ip::{objective_gradient, score_against};
use super::{InfluenceReport, Method, Objective};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{hessian, ParamVector};
use crate::scalar::Scalar;

/// Damped influence `tᵀ (H + λI)⁻¹ g_i` with `t` the summed validation loss
/// gradient. Linear model only.
pub fn exact_influence<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    damping: T,
) -> Result<InfluenceReport<T>> {
    exact_influence_for(theta, train, val, Objective::Utility, damping)
}

/// Damped influence for any objective. `(H + λI)` is factorized once and the
/// solve is done on the validation side, `u = (H + λI)⁻¹ t`, so each training
/// sample costs one inner product.
pub fn exact_influence_for<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    objective: Objective,
    damping: T,
) -> Result<InfluenceReport<T>> {
    if !theta.arch().is_linear() {
        return Err(Error::UnsupportedArch(
            "exact influence is restricted to the linear model".into(),
        ));
    }
    if !(damping > T::zero()) {
        return Err(Error::arg("exact influence needs a positive damping"));
    }
    if val.is_empty() {
        return Err(Error::arg("influence needs a non-empty validation set"));
    }
    let h = hessian(theta, train, T::zero(), damping)?;
    let target = objective_gradient(theta, val, objective)?;
    let u = h.cholesky()?.solve(&target.values)?;
    let scores = score_against(theta, train, &u)?;
    InfluenceReport::new(Method::Exact, objective, scores, theta.fingerprint())
}
