use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::ParamVector;
use crate::scalar::Scalar;

/// White-box evasion step against a linear model `(w, b)`:
/// `x' = x − γ (wᵀx + b) / (wᵀw) · w`, which scales the signed margin by `1 − γ`.
pub fn perturb_point<T: Scalar>(x: &[T], coef: &[T], intercept: T, gamma: T) -> Vec<T> {
    let margin = linalg::dot(coef, x) + intercept;
    let step = gamma * margin / linalg::norm_sq(coef);
    x.iter().zip(coef).map(|(&xi, &wi)| xi - step * wi).collect()
}

/// Perturbs a uniformly random `⌈fraction·n⌉` subset of `validation` against
/// the linear model `theta`. Labels and unselected rows are untouched.
pub fn craft_adversarial<T: Scalar>(
    validation: &Dataset<T>,
    theta: &ParamVector<T>,
    gamma: f64,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, BTreeSet<SampleId>)> {
    let (coef, intercept) = theta.linear_parts()?;
    if coef.len() != validation.n_features() {
        return Err(Error::Shape {
            expected: coef.len(),
            found: validation.n_features(),
        });
    }
    if linalg::norm_sq(coef) == T::zero() {
        return Err(Error::DegenerateModel(
            "linear model has zero coefficient norm; the decision boundary is undefined".into(),
        ));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::arg(format!("gamma must be positive, got {gamma}")));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::arg(format!(
            "attack fraction must lie in [0,1], got {fraction}"
        )));
    }
    let n = validation.len();
    let count = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let count = count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = index::sample(&mut rng, n, count).into_vec();

    let d = validation.n_features();
    let mut features = validation.features().to_vec();
    let g = T::c(gamma);
    let mut perturbed = BTreeSet::new();
    for r in rows {
        let x = perturb_point(validation.row(r), coef, intercept, g);
        features[r * d..(r + 1) * d].copy_from_slice(&x);
        perturbed.insert(validation.ids()[r]);
    }
    Ok((validation.with_features(features)?, perturbed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;

    fn model() -> ParamVector<f64> {
        ParamVector::linear(&[1.3, -0.4], 0.25).unwrap()
    }

    fn margin(theta: &ParamVector<f64>, x: &[f64]) -> f64 {
        let (w, b) = theta.linear_parts().unwrap();
        linalg::dot(w, x) + b
    }

    #[test]
    fn gamma_one_lands_on_boundary() {
        let (_, te) = make_blobs::<f64>(10, 50, 4.0, 1).unwrap();
        let theta = model();
        let (adv, ids) = craft_adversarial(&te, &theta, 1.0, 1.0, 3).unwrap();
        assert_eq!(ids.len(), 50);
        for i in 0..adv.len() {
            assert!(margin(&theta, adv.row(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn gamma_two_negates_margin_and_keeps_rest() {
        let (_, te) = make_blobs::<f64>(10, 40, 4.0, 1).unwrap();
        let theta = model();
        let (adv, ids) = craft_adversarial(&te, &theta, 2.0, 0.25, 3).unwrap();
        assert_eq!(ids.len(), 10);
        assert_eq!(adv.labels(), te.labels());
        for i in 0..te.len() {
            if ids.contains(&te.ids()[i]) {
                let (m0, m1) = (margin(&theta, te.row(i)), margin(&theta, adv.row(i)));
                assert!((m1 + m0).abs() < 1e-12 * (1.0 + m0.abs()));
            } else {
                assert_eq!(adv.row(i), te.row(i));
            }
        }
    }

    #[test]
    fn subset_size_is_ceiling() {
        let (_, te) = make_blobs::<f64>(10, 30, 4.0, 1).unwrap();
        let (_, ids) = craft_adversarial(&te, &model(), 2.0, 0.05, 0).unwrap();
        assert_eq!(ids.len(), 2);
        let (same, none) = craft_adversarial(&te, &model(), 2.0, 0.0, 0).unwrap();
        assert!(none.is_empty());
        assert_eq!(same, te);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let (_, te) = make_blobs::<f64>(10, 10, 4.0, 1).unwrap();
        let flat = ParamVector::linear(&[0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            craft_adversarial(&te, &flat, 1.0, 0.5, 0),
            Err(Error::DegenerateModel(_))
        ));
        assert!(craft_adversarial(&te, &model(), 0.0, 0.5, 0).is_err());
        assert!(craft_adversarial(&te, &model(), 1.0, 1.5, 0).is_err());
        let mlp = ParamVector::<f64>::zeros(crate::models::Arch::mlp_default(2)).unwrap();
        assert!(craft_adversarial(&te, &mlp, 1.0, 0.5, 0).is_err());
    }
}
