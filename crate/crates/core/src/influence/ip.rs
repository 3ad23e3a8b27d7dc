use std::collections::BTreeMap;

use super::{InfluenceReport, Method, Objective};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{
    batch_grad, logit_and_grad, per_sample_grad, EnsembleSpec, GradOrigin, GradientVector,
    ParamVector,
};
use crate::scalar::{sigmoid, Scalar};

/// Loss gradient of every training row, in row order.
pub fn training_gradients<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
) -> Result<Vec<GradientVector<T>>> {
    train.samples().map(|z| per_sample_grad(theta, z)).collect()
}

/// Gradient of the demographic-parity gap
/// `|mean_{g=1} σ(f(x)) − mean_{g=0} σ(f(x))|` over `val`. At a gap of exactly
/// zero the subgradient is taken to be zero.
pub fn dp_gap_gradient<T: Scalar>(
    theta: &ParamVector<T>,
    val: &Dataset<T>,
) -> Result<GradientVector<T>> {
    let group = val
        .group()
        .ok_or_else(|| Error::arg("fairness influence needs a validation set with groups"))?;
    let p = theta.len();
    let mut sums = [vec![T::zero(); p], vec![T::zero(); p]];
    let mut means = [T::zero(); 2];
    let mut counts = [0usize; 2];
    for (i, z) in val.samples().enumerate() {
        let g = usize::from(group[i]);
        let (f, grad) = logit_and_grad(theta, z.x)?;
        let prob = sigmoid(f);
        means[g] += prob;
        counts[g] += 1;
        linalg::axpy(prob * (T::one() - prob), &grad, &mut sums[g]);
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::arg(
            "fairness influence needs both groups present in the validation set",
        ));
    }
    let n0 = T::from_usize_lossy(counts[0]);
    let n1 = T::from_usize_lossy(counts[1]);
    let gap = means[1] / n1 - means[0] / n0;
    let sign = if gap > T::zero() {
        T::one()
    } else if gap < T::zero() {
        -T::one()
    } else {
        T::zero()
    };
    let values = sums[1]
        .iter()
        .zip(&sums[0])
        .map(|(&a, &b)| sign * (a / n1 - b / n0))
        .collect();
    Ok(GradientVector::new(values, GradOrigin::FairnessObjective))
}

/// Target direction paired with training gradients for `objective`.
pub fn objective_gradient<T: Scalar>(
    theta: &ParamVector<T>,
    val: &Dataset<T>,
    objective: Objective,
) -> Result<GradientVector<T>> {
    match objective {
        Objective::Utility | Objective::Robustness => batch_grad(theta, val),
        Objective::Fairness => dp_gap_gradient(theta, val),
    }
}

fn method_for(objective: Objective) -> Method {
    match objective {
        Objective::Utility => Method::Ip,
        Objective::Fairness => Method::IpFair,
        Objective::Robustness => Method::IpRobust,
    }
}

/// Inner-product influence of every training sample for `objective`.
pub fn ip_influence<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    objective: Objective,
) -> Result<InfluenceReport<T>> {
    if val.is_empty() {
        return Err(Error::arg("influence needs a non-empty validation set"));
    }
    let target = objective_gradient(theta, val, objective)?;
    let scores = score_against(theta, train, &target.values)?;
    InfluenceReport::new(method_for(objective), objective, scores, theta.fingerprint())
}

pub(crate) fn score_against<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    target: &[T],
) -> Result<BTreeMap<crate::data::SampleId, T>> {
    let mut scores = BTreeMap::new();
    for (i, z) in train.samples().enumerate() {
        let g = per_sample_grad(theta, z)?;
        scores.insert(train.ids()[i], linalg::dot(target, &g.values));
    }
    Ok(scores)
}

/// `score_i = (Σ_{z_j ∈ val} ∇ℓ(z_j))ᵀ ∇ℓ(z_i)`.
pub fn ip_utility<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
) -> Result<InfluenceReport<T>> {
    ip_influence(theta, train, val, Objective::Utility)
}

/// `score_i = ∇(DP gap on val)ᵀ ∇ℓ(z_i)`.
pub fn ip_fairness<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val_with_groups: &Dataset<T>,
) -> Result<InfluenceReport<T>> {
    ip_influence(theta, train, val_with_groups, Objective::Fairness)
}

/// Utility IP computed over an adversarially perturbed validation set.
pub fn ip_robustness<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val_adv: &Dataset<T>,
) -> Result<InfluenceReport<T>> {
    ip_influence(theta, train, val_adv, Objective::Robustness)
}

/// `score_i = ‖∇ℓ(z_i)‖²`; high values mark suspected detrimental samples.
pub fn self_influence<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
) -> Result<InfluenceReport<T>> {
    let mut scores = BTreeMap::new();
    for (i, z) in train.samples().enumerate() {
        scores.insert(train.ids()[i], per_sample_grad(theta, z)?.norm_sq());
    }
    InfluenceReport::new(Method::SelfIp, Objective::Utility, scores, theta.fingerprint())
}

/// Arithmetic mean of single-model IP reports over `param_sets`.
///
/// The method tag follows the ensemble strategy of `spec` (IP Ensemble when
/// no spec is given).
pub fn ensemble_influence<T: Scalar>(
    param_sets: &[ParamVector<T>],
    train: &Dataset<T>,
    val: &Dataset<T>,
    objective: Objective,
    spec: Option<&EnsembleSpec>,
) -> Result<InfluenceReport<T>> {
    let first = param_sets
        .first()
        .ok_or_else(|| Error::arg("ensemble needs at least one parameter set"))?;
    if param_sets.iter().any(|p| p.arch() != first.arch()) {
        return Err(Error::arg("ensemble members must share one architecture"));
    }
    let mut acc: BTreeMap<_, T> = BTreeMap::new();
    let mut fingerprint = String::new();
    for theta in param_sets {
        let report = ip_influence(theta, train, val, objective)?;
        for (id, v) in report.scores {
            *acc.entry(id).or_insert_with(T::zero) += v;
        }
        fingerprint.push_str(&theta.fingerprint());
    }
    let t = T::from_usize_lossy(param_sets.len());
    for v in acc.values_mut() {
        *v /= t;
    }
    let method = spec.map_or(Method::IpEnsemble, |s| Method::for_ensemble(s.strategy));
    let fp = if param_sets.len() == 1 {
        fingerprint
    } else {
        use sha2::{Digest, Sha256};
        Sha256::digest(fingerprint.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    };
    Ok(InfluenceReport::new(method, objective, acc, fp)?
        .with_ensemble(spec.cloned())
        .with_seed(spec.map(|s| s.seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, SampleId};
    use crate::models::{train, Arch, TrainConfig};

    fn fitted() -> (ParamVector<f64>, Dataset<f64>, Dataset<f64>) {
        let (tr, te) = make_blobs::<f64>(60, 30, 3.0, 4).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        let out = train(&tr, &Arch::linear(2), &cfg).unwrap();
        (out.params, tr, te)
    }

    #[test]
    fn self_inner_product_and_orthogonality() {
        // θ = 0: g(x, y) = (0.5 − y)[x; 1]
        let theta = ParamVector::<f64>::zeros(Arch::linear(2)).unwrap();
        let val = Dataset::with_sequential_ids(vec![1.0, 2.0], 2, vec![0], None).unwrap();
        // v = 0.5 [1, 2, 1]; a training copy of the sample has gradient v,
        // and [−1, 0, 1] is orthogonal to [1, 2, 1].
        let train = Dataset::with_sequential_ids(vec![1.0, 2.0, -1.0, 0.0], 2, vec![0, 0], None)
            .unwrap();
        let r = ip_utility(&theta, &train, &val).unwrap();
        assert!((r.get(&SampleId(0)).unwrap() - 0.25 * 6.0).abs() < 1e-15);
        assert_eq!(r.get(&SampleId(1)).unwrap(), 0.0);
    }

    #[test]
    fn empty_validation_is_rejected() {
        let (theta, tr, te) = fitted();
        assert!(ip_utility(&theta, &tr, &te.select(&[])).is_err());
    }

    #[test]
    fn robustness_on_clean_set_equals_utility() {
        let (theta, tr, te) = fitted();
        let u = ip_utility(&theta, &tr, &te).unwrap();
        let r = ip_robustness(&theta, &tr, &te).unwrap();
        assert_eq!(u.scores, r.scores);
        assert_eq!(r.method, Method::IpRobust);
    }

    #[test]
    fn fairness_requires_both_groups() {
        let (theta, tr, te) = fitted();
        assert!(ip_fairness(&theta, &tr, &te).is_err());
        let one_group = te.with_group(Some(vec![1; te.len()])).unwrap();
        assert!(ip_fairness(&theta, &tr, &one_group).is_err());
    }

    #[test]
    fn mirrored_groups_give_zero_fairness_scores() {
        let (theta, tr, te) = fitted();
        let n = te.len();
        let rows: Vec<usize> = (0..n).chain(0..n).collect();
        let doubled = te.select(&rows);
        let doubled = crate::data::Dataset::with_sequential_ids(
            doubled.features().to_vec(),
            2,
            doubled.labels().to_vec(),
            Some((0..2 * n).map(|i| u8::from(i >= n)).collect()),
        )
        .unwrap();
        let r = ip_fairness(&theta, &tr, &doubled).unwrap();
        assert!(r.scores.values().all(|&v| v == 0.0));
    }

    #[test]
    fn self_influence_is_nonnegative() {
        let (theta, tr, _) = fitted();
        let r = self_influence(&theta, &tr).unwrap();
        assert!(r.scores.values().all(|&v| v >= 0.0));
        assert!(r.method.high_is_detrimental());
    }

    #[test]
    fn ensemble_rejects_empty_and_mixed() {
        let (theta, tr, te) = fitted();
        assert!(ensemble_influence(&[], &tr, &te, Objective::Utility, None).is_err());
        let other = ParamVector::<f64>::zeros(Arch::Mlp {
            input: 2,
            hidden: vec![4],
            activation: crate::models::Activation::Relu,
        })
        .unwrap();
        assert!(ensemble_influence(&[theta, other], &tr, &te, Objective::Utility, None).is_err());
    }

    #[test]
    fn single_member_ensemble_is_plain_ip() {
        let (theta, tr, te) = fitted();
        let e = ensemble_influence(std::slice::from_ref(&theta), &tr, &te, Objective::Utility, None).unwrap();
        let ip = ip_utility(&theta, &tr, &te).unwrap();
        assert_eq!(e.scores, ip.scores);
        assert_eq!(e.model_fingerprint, ip.model_fingerprint);
    }
}
