//! Stochastic Neumann-series estimate of inverse-Hessian-vector products.
//!
//! With `A = H + λI` and a scale `s` such that the spectrum of `sA` lies in
//! `(0, 2)`, the recursion `h ← v + (I − sA) h` converges to `(sA)⁻¹ v`, so
//! `A⁻¹ v = s·h`. Curvature enters only through Hessian-vector products.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ip::{objective_gradient, score_against};
use super::{InfluenceReport, Method, Objective};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{hessian_vector_product, GradOrigin, GradientVector, ParamVector};
use crate::scalar::{sigmoid, Scalar};

const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LissaConfig {
    /// Maximum recursion depth per repeat.
    pub depth: usize,
    pub damping: f64,
    /// `None` picks `1 / (λ + spectral bound)`.
    pub scale: Option<f64>,
    pub repeats: usize,
    /// Rows per stochastic Hessian-vector product; `None` uses every row.
    pub batch_size: Option<usize>,
    /// Stop a repeat early once `‖h_{t+1} − h_t‖ ≤ tolerance·‖h_{t+1}‖`; 0 disables.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LissaConfig {
    fn default() -> Self {
        Self {
            depth: 500,
            damping: 1e-2,
            scale: None,
            repeats: 4,
            batch_size: None,
            tolerance: 0.0,
            seed: 0,
        }
    }
}

impl LissaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.repeats == 0 {
            return Err(Error::arg("LiSSA depth and repeats must be at least 1"));
        }
        if !(self.damping > 0.0) {
            return Err(Error::arg("LiSSA damping must be positive"));
        }
        if let Some(s) = self.scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::arg("LiSSA scale must be positive"));
            }
        }
        if self.batch_size == Some(0) {
            return Err(Error::arg("LiSSA batch size must be positive"));
        }
        Ok(())
    }
}

/// Undamped curvature operator seen by the recursion.
pub trait HessianOperator<T: Scalar> {
    fn dim(&self) -> usize;

    /// (Possibly stochastic) estimate of `H v`.
    fn apply(&self, v: &[T], rng: &mut ChaCha8Rng) -> Result<Vec<T>>;

    /// Upper bound on the spectral norm of `H`.
    fn spectral_bound(&self) -> T;
}

/// Hessian of the summed cross-entropy of a logistic model.
pub struct LogisticHessianOperator<'a, T> {
    theta: &'a ParamVector<T>,
    data: &'a Dataset<T>,
    batch_size: Option<usize>,
}

impl<'a, T: Scalar> LogisticHessianOperator<'a, T> {
    pub fn new(
        theta: &'a ParamVector<T>,
        data: &'a Dataset<T>,
        batch_size: Option<usize>,
    ) -> Result<Self> {
        let (coef, _) = theta.linear_parts().map_err(|_| {
            Error::UnsupportedArch("LiSSA is verified on the linear model only".into())
        })?;
        if coef.len() != data.n_features() {
            return Err(Error::Shape {
                expected: coef.len(),
                found: data.n_features(),
            });
        }
        Ok(Self {
            theta,
            data,
            batch_size,
        })
    }
}

impl<T: Scalar> HessianOperator<T> for LogisticHessianOperator<'_, T> {
    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn apply(&self, v: &[T], rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        let n = self.data.len();
        match self.batch_size {
            Some(b) if b < n => {
                let rows = index::sample(rng, n, b).into_vec();
                let mut hv = hessian_vector_product(self.theta, self.data, Some(&rows), v)?;
                let rescale = T::from_usize_lossy(n) / T::from_usize_lossy(b);
                hv.iter_mut().for_each(|x| *x *= rescale);
                Ok(hv)
            }
            _ => hessian_vector_product(self.theta, self.data, None, v),
        }
    }

    /// Gershgorin row-sum bound, relaxed so it is computable in `O(np)`:
    /// `max_i Σ_k w_k |x̃_ki| ‖x̃_k‖₁`.
    fn spectral_bound(&self) -> T {
        let (coef, b) = self.theta.linear_parts().expect("checked in constructor");
        let d = coef.len();
        let mut rows = vec![T::zero(); d + 1];
        for z in self.data.samples() {
            let s = sigmoid(linalg::dot(coef, z.x) + b);
            let w = s * (T::one() - s);
            let l1 = z.x.iter().fold(T::one(), |acc, v| acc + v.abs());
            for (j, &x) in z.x.iter().enumerate() {
                rows[j] += w * x.abs() * l1;
            }
            rows[d] += w * l1;
        }
        rows.into_iter().fold(T::zero(), T::max)
    }
}

/// Diagonal operator, handy for checking the recursion in isolation.
pub struct DiagonalOperator<T> {
    pub diag: Vec<T>,
}

impl<T: Scalar> HessianOperator<T> for DiagonalOperator<T> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, v: &[T], _rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        Ok(self.diag.iter().zip(v).map(|(&d, &x)| d * x).collect())
    }

    fn spectral_bound(&self) -> T {
        self.diag.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }
}

/// Estimates `(H + λI)⁻¹ v` for any curvature operator.
pub fn lissa_solve<T: Scalar, H: HessianOperator<T>>(
    op: &H,
    v: &[T],
    cfg: &LissaConfig,
) -> Result<Vec<T>> {
    cfg.validate()?;
    if v.len() != op.dim() {
        return Err(Error::Shape {
            expected: op.dim(),
            found: v.len(),
        });
    }
    let damping = T::c(cfg.damping);
    let bound = op.spectral_bound();
    let scale = match cfg.scale {
        Some(s) => T::c(s),
        None => T::one() / (damping + bound),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut total = vec![T::zero(); v.len()];
    let tol = T::c(cfg.tolerance);
    for _ in 0..cfg.repeats {
        let mut h = v.to_vec();
        for _ in 0..cfg.depth {
            let hv = op.apply(&h, &mut rng)?;
            let mut next = v.to_vec();
            let mut change = T::zero();
            for i in 0..h.len() {
                let updated = next[i] + h[i] - scale * (hv[i] + damping * h[i]);
                change += (updated - h[i]) * (updated - h[i]);
                next[i] = updated;
            }
            let size = linalg::norm(&next);
            if !(size.as_f64() <= DIVERGENCE_NORM) {
                return Err(Error::NonConvergence(format!(
                    "LiSSA iterate norm exceeded {DIVERGENCE_NORM:e}; the scale condition \
                     scale·(λ + ‖H‖) < 2 is violated (scale = {scale}, λ = {damping}, \
                     spectral bound = {bound})"
                )));
            }
            h = next;
            if tol > T::zero() && change.sqrt() <= tol * size {
                break;
            }
        }
        linalg::axpy(T::one(), &h, &mut total);
    }
    let factor = scale / T::from_usize_lossy(cfg.repeats);
    Ok(total.into_iter().map(|x| x * factor).collect())
}

/// LiSSA estimate of `(H + λI)⁻¹ v` for the logistic model trained on `train`.
pub fn lissa_ihvp<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    v: &GradientVector<T>,
    cfg: &LissaConfig,
) -> Result<GradientVector<T>> {
    let op = LogisticHessianOperator::new(theta, train, cfg.batch_size)?;
    let values = lissa_solve(&op, &v.values, cfg)?;
    Ok(GradientVector::new(values, v.origin))
}

/// Influence with the inverse Hessian replaced by its LiSSA estimate.
pub fn lissa_influence<T: Scalar>(
    theta: &ParamVector<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    objective: Objective,
    cfg: &LissaConfig,
) -> Result<InfluenceReport<T>> {
    if val.is_empty() {
        return Err(Error::arg("influence needs a non-empty validation set"));
    }
    let target = objective_gradient(theta, val, objective)?;
    let u = lissa_ihvp(theta, train, &target, cfg)?;
    debug_assert!(u.origin != GradOrigin::SingleSample);
    let scores = score_against(theta, train, &u.values)?;
    Ok(InfluenceReport::new(Method::Lissa, objective, scores, theta.fingerprint())?
        .with_seed(Some(cfg.seed)))
}
