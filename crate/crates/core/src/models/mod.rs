//! Differentiable binary classifiers over flattened parameter vectors.
//!
//! Two architectures are supported: logistic regression (`Linear`) and a
//! small fully connected network (`Mlp`) with a single logit output. Both are
//! trained with binary cross-entropy.

mod ensemble;
mod net;
mod train;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use ensemble::{generate_param_sets, EnsembleSpec, EnsembleStrategy};
pub use net::{
    batch_grad, hessian, hessian_vector_product, logit, logit_and_grad, loss, per_sample_grad,
    predict_proba, LOSS_CLAMP,
};
pub use train::{continue_sgd, init_params, train, train_weighted, TrainConfig, TrainOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub(crate) fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    pub(crate) fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
        }
    }
}

/// Architecture descriptor; fixes the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    /// Logistic regression on `d` features. Layout: `[w_0 .. w_{d-1}, b]`.
    Linear { d: usize },
    /// Fully connected network with one logit output. Each layer stores its
    /// `out × in` weight matrix row-major followed by its `out` biases.
    Mlp {
        input: usize,
        hidden: Vec<usize>,
        activation: Activation,
    },
}

impl Arch {
    pub fn linear(d: usize) -> Self {
        Arch::Linear { d }
    }

    /// Two hidden layers of width 32 with ReLU.
    pub fn mlp_default(input: usize) -> Self {
        Arch::Mlp {
            input,
            hidden: vec![32, 32],
            activation: Activation::Relu,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Arch::Linear { d } => *d,
            Arch::Mlp { input, .. } => *input,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Arch::Linear { .. })
    }

    /// `(fan_in, fan_out)` per dense layer, the output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        match self {
            Arch::Linear { d } => vec![(*d, 1)],
            Arch::Mlp { input, hidden, .. } => {
                let mut dims = Vec::with_capacity(hidden.len() + 1);
                let mut prev = *input;
                for &h in hidden {
                    dims.push((prev, h));
                    prev = h;
                }
                dims.push((prev, 1));
                dims
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim() == 0 {
            return Err(Error::arg("architecture needs a positive input dimension"));
        }
        if let Arch::Mlp { hidden, .. } = self {
            if hidden.contains(&0) {
                return Err(Error::arg("hidden layer widths must be positive"));
            }
        }
        Ok(())
    }
}

/// Flattened model parameters tagged with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    values: Vec<T>,
    arch: Arch,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(arch: Arch, values: Vec<T>) -> Result<Self> {
        arch.validate()?;
        let p = arch.param_count();
        if values.len() != p {
            return Err(Error::Shape {
                expected: p,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self { values, arch })
    }

    pub fn zeros(arch: Arch) -> Result<Self> {
        let p = arch.param_count();
        Self::new(arch, vec![T::zero(); p])
    }

    /// Linear model from coefficients and intercept.
    pub fn linear(coef: &[T], intercept: T) -> Result<Self> {
        let mut values = coef.to_vec();
        values.push(intercept);
        Self::new(Arch::linear(coef.len()), values)
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficients and intercept of a linear model.
    pub fn linear_parts(&self) -> Result<(&[T], T)> {
        match self.arch {
            Arch::Linear { d } => Ok((&self.values[..d], self.values[d])),
            _ => Err(Error::UnsupportedArch(
                "operation requires a linear model".into(),
            )),
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Replaces the values, keeping the architecture.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.arch.clone(), values)
    }

    /// Short content hash of architecture and exact parameter bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.arch).expect("arch serializes"));
        for v in &self.values {
            h.update(v.as_f64().to_bits().to_le_bytes());
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> ParamVector<U> {
        ParamVector {
            values: self.values.iter().map(|v| U::c(v.as_f64())).collect(),
            arch: self.arch.clone(),
        }
    }
}

/// What a gradient vector was taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradOrigin {
    SingleSample,
    ValidationAggregate,
    FairnessObjective,
}

/// A gradient in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T> {
    pub values: Vec<T>,
    pub origin: GradOrigin,
}

impl<T: Scalar> GradientVector<T> {
    pub fn new(values: Vec<T>, origin: GradOrigin) -> Self {
        Self { values, origin }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, other: &GradientVector<T>) -> T {
        crate::linalg::dot(&self.values, &other.values)
    }

    pub fn norm_sq(&self) -> T {
        crate::linalg::norm_sq(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Dense symmetric `p × p` Hessian, row-major, with the damping that was added.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix<T> {
    dim: usize,
    values: Vec<T>,
    damping: T,
}

impl<T: Scalar> HessianMatrix<T> {
    pub(crate) fn from_parts(dim: usize, values: Vec<T>, damping: T) -> Self {
        debug_assert_eq!(values.len(), dim * dim);
        Self {
            dim,
            values,
            damping,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn damping(&self) -> T {
        self.damping
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.dim + j]
    }

    /// `max |H_ij − H_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| crate::linalg::dot(&self.values[i * self.dim..(i + 1) * self.dim], v))
            .collect()
    }

    pub fn cholesky(&self) -> Result<crate::linalg::Cholesky<T>> {
        crate::linalg::Cholesky::factor(&self.values, self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        assert_eq!(Arch::linear(2).param_count(), 3);
        // 2→32→32→1
        assert_eq!(Arch::mlp_default(2).param_count(), 2 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
    }

    #[test]
    fn param_vector_checks_length_and_finiteness() {
        assert!(ParamVector::<f64>::new(Arch::linear(2), vec![0.0; 2]).is_err());
        assert!(ParamVector::<f64>::new(Arch::linear(2), vec![0.0, f64::NAN, 1.0]).is_err());
        let p = ParamVector::<f64>::linear(&[1.0, 2.0], 3.0).unwrap();
        assert_eq!(p.linear_parts().unwrap(), (&[1.0, 2.0][..], 3.0));
    }

    #[test]
    fn fingerprint_tracks_values() {
        let a = ParamVector::<f64>::linear(&[1.0, 2.0], 3.0).unwrap();
        let b = ParamVector::<f64>::linear(&[1.0, 2.0], 3.0000001).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn mlp_rejects_linear_only_accessors() {
        let p = ParamVector::<f64>::zeros(Arch::mlp_default(2)).unwrap();
        assert!(matches!(p.linear_parts(), Err(Error::UnsupportedArch(_))));
    }
}
