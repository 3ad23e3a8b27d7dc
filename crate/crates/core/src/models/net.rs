use super::{Activation, Arch, GradOrigin, GradientVector, HessianMatrix, ParamVector};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{sigmoid, softplus, Scalar};

/// Predicted probabilities are kept inside `[LOSS_CLAMP, 1 − LOSS_CLAMP]`
/// when evaluating the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

fn check_input<T: Scalar>(theta: &ParamVector<T>, x: &[T]) -> Result<()> {
    let d = theta.arch().input_dim();
    if x.len() != d {
        return Err(Error::Shape {
            expected: d,
            found: x.len(),
        });
    }
    Ok(())
}

/// Network output before the sigmoid.
pub fn logit<T: Scalar>(theta: &ParamVector<T>, x: &[T]) -> Result<T> {
    check_input(theta, x)?;
    Ok(match theta.arch() {
        Arch::Linear { d } => {
            let v = theta.values();
            linalg::dot(&v[..*d], x) + v[*d]
        }
        Arch::Mlp { activation, .. } => {
            let dims = theta.arch().layer_dims();
            mlp_forward(theta.values(), &dims, *activation, x).logit
        }
    })
}

pub fn predict_proba<T: Scalar>(theta: &ParamVector<T>, x: &[T]) -> Result<T> {
    logit(theta, x).map(sigmoid)
}

/// Binary cross-entropy of one sample.
pub fn loss<T: Scalar>(theta: &ParamVector<T>, z: Sample<'_, T>) -> Result<T> {
    let f = logit(theta, z.x)?;
    // −ln σ(f) = softplus(−f), −ln(1 − σ(f)) = softplus(f)
    let raw = if z.y == 1 { softplus(-f) } else { softplus(f) };
    let hi = -T::c(LOSS_CLAMP).ln();
    let lo = -(-T::c(LOSS_CLAMP)).ln_1p();
    Ok(raw.max(lo).min(hi))
}

/// Logit together with its gradient with respect to every parameter.
pub fn logit_and_grad<T: Scalar>(theta: &ParamVector<T>, x: &[T]) -> Result<(T, Vec<T>)> {
    check_input(theta, x)?;
    match theta.arch() {
        Arch::Linear { d } => {
            let v = theta.values();
            let f = linalg::dot(&v[..*d], x) + v[*d];
            let mut g = Vec::with_capacity(d + 1);
            g.extend_from_slice(x);
            g.push(T::one());
            Ok((f, g))
        }
        Arch::Mlp { activation, .. } => {
            let dims = theta.arch().layer_dims();
            let fwd = mlp_forward(theta.values(), &dims, *activation, x);
            let g = mlp_backward(theta.values(), &dims, *activation, &fwd);
            Ok((fwd.logit, g))
        }
    }
}

/// Gradient of [`loss`]: `(σ(f) − y) ∇f`.
pub fn per_sample_grad<T: Scalar>(
    theta: &ParamVector<T>,
    z: Sample<'_, T>,
) -> Result<GradientVector<T>> {
    let (f, mut g) = logit_and_grad(theta, z.x)?;
    let residual = sigmoid(f) - T::c(f64::from(z.y));
    for v in &mut g {
        *v *= residual;
    }
    Ok(GradientVector::new(g, GradOrigin::SingleSample))
}

/// Sum of per-sample loss gradients over `ds`.
pub fn batch_grad<T: Scalar>(theta: &ParamVector<T>, ds: &Dataset<T>) -> Result<GradientVector<T>> {
    if ds.is_empty() {
        return Err(Error::arg("batch gradient over an empty sample set"));
    }
    let mut acc = vec![T::zero(); theta.len()];
    for z in ds.samples() {
        let g = per_sample_grad(theta, z)?;
        linalg::axpy(T::one(), &g.values, &mut acc);
    }
    Ok(GradientVector::new(acc, GradOrigin::ValidationAggregate))
}

/// Exact Hessian of the summed loss of a logistic model:
/// `Σ σ_i(1−σ_i) x̃_i x̃_iᵀ + (n·weight_decay + damping) I` with `x̃ = [x; 1]`.
///
/// `weight_decay` is the per-sample L2 coefficient of the training objective,
/// hence the factor `n` once the loss is summed rather than averaged.
pub fn hessian<T: Scalar>(
    theta: &ParamVector<T>,
    ds: &Dataset<T>,
    weight_decay: T,
    damping: T,
) -> Result<HessianMatrix<T>> {
    let (coef, b) = theta.linear_parts().map_err(|_| {
        Error::UnsupportedArch("exact Hessian is only available for the linear model".into())
    })?;
    if damping < T::zero() || weight_decay < T::zero() {
        return Err(Error::arg("damping and weight decay must be non-negative"));
    }
    let d = coef.len();
    if ds.n_features() != d {
        return Err(Error::Shape {
            expected: d,
            found: ds.n_features(),
        });
    }
    let p = d + 1;
    let mut h = vec![T::zero(); p * p];
    let mut xt = vec![T::one(); p];
    for z in ds.samples() {
        xt[..d].copy_from_slice(z.x);
        let s = sigmoid(linalg::dot(coef, z.x) + b);
        let w = s * (T::one() - s);
        for i in 0..p {
            let wi = w * xt[i];
            for j in 0..=i {
                h[i * p + j] += wi * xt[j];
            }
        }
    }
    let diag = T::from_usize_lossy(ds.len()) * weight_decay + damping;
    for i in 0..p {
        h[i * p + i] += diag;
        for j in 0..i {
            h[j * p + i] = h[i * p + j];
        }
    }
    Ok(HessianMatrix::from_parts(p, h, damping))
}

/// `Σ_{i∈rows} σ_i(1−σ_i) (x̃_i·v) x̃_i` for a logistic model, without forming
/// the Hessian. `rows = None` uses every row.
pub fn hessian_vector_product<T: Scalar>(
    theta: &ParamVector<T>,
    ds: &Dataset<T>,
    rows: Option<&[usize]>,
    v: &[T],
) -> Result<Vec<T>> {
    let (coef, b) = theta.linear_parts()?;
    let d = coef.len();
    if v.len() != d + 1 {
        return Err(Error::Shape {
            expected: d + 1,
            found: v.len(),
        });
    }
    let mut out = vec![T::zero(); d + 1];
    let mut add = |i: usize| {
        let x = ds.row(i);
        let s = sigmoid(linalg::dot(coef, x) + b);
        let proj = (linalg::dot(&v[..d], x) + v[d]) * s * (T::one() - s);
        linalg::axpy(proj, x, &mut out[..d]);
        out[d] += proj;
    };
    match rows {
        Some(rows) => rows.iter().for_each(|&i| add(i)),
        None => (0..ds.len()).for_each(add),
    }
    Ok(out)
}

struct Forward<T> {
    /// Layer inputs; `inputs[0]` is the sample itself.
    inputs: Vec<Vec<T>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<T>>,
    logit: T,
}

fn mlp_forward<T: Scalar>(
    params: &[T],
    dims: &[(usize, usize)],
    act: Activation,
    x: &[T],
) -> Forward<T> {
    let mut inputs = vec![x.to_vec()];
    let mut pre = Vec::with_capacity(dims.len() - 1);
    let mut off = 0;
    let mut logit = T::zero();
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let w = &params[off..off + fan_in * fan_out];
        let b = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        off += fan_in * fan_out + fan_out;
        let a = inputs.last().expect("input present");
        let z: Vec<T> = (0..fan_out)
            .map(|o| linalg::dot(&w[o * fan_in..(o + 1) * fan_in], a) + b[o])
            .collect();
        if l + 1 == dims.len() {
            logit = z[0];
        } else {
            inputs.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
        }
    }
    Forward { inputs, pre, logit }
}

fn mlp_backward<T: Scalar>(
    params: &[T],
    dims: &[(usize, usize)],
    act: Activation,
    fwd: &Forward<T>,
) -> Vec<T> {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &(i, o) in dims {
        offsets.push(off);
        off += i * o + o;
    }
    let mut grad = vec![T::zero(); off];
    let mut delta = vec![T::one()];
    for l in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[l];
        let base = offsets[l];
        let a = &fwd.inputs[l];
        for o in 0..fan_out {
            let row = &mut grad[base + o * fan_in..base + (o + 1) * fan_in];
            linalg::axpy(delta[o], a, row);
            grad[base + fan_in * fan_out + o] = delta[o];
        }
        if l > 0 {
            let w = &params[base..base + fan_in * fan_out];
            let z = &fwd.pre[l - 1];
            delta = (0..fan_in)
                .map(|i| {
                    let back = (0..fan_out).fold(T::zero(), |s, o| s + w[o * fan_in + i] * delta[o]);
                    back * act.derivative(z[i])
                })
                .collect();
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;

    #[test]
    fn zero_linear_model_has_ln2_loss() {
        let theta = ParamVector::<f64>::zeros(Arch::linear(3)).unwrap();
        for y in [0u8, 1] {
            let l = loss(&theta, Sample { x: &[1.0, -2.0, 0.5], y }).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_is_clamped() {
        let theta = ParamVector::<f64>::linear(&[1.0], 0.0).unwrap();
        let bad = loss(&theta, Sample { x: &[1e6], y: 0 }).unwrap();
        assert!(bad <= -(1e-12f64).ln() + 1e-9);
        let good = loss(&theta, Sample { x: &[1e6], y: 1 }).unwrap();
        assert!(good >= 0.0 && good.is_finite());
        let theta32 = ParamVector::<f32>::linear(&[1.0], 0.0).unwrap();
        assert!(loss(&theta32, Sample { x: &[1e6], y: 0 }).unwrap().is_finite());
    }

    #[test]
    fn scalar_loss_oracle() {
        // θ = (w=1, b=0), x = 2, y = 1 → −ln σ(2)
        let theta = ParamVector::<f64>::linear(&[1.0], 0.0).unwrap();
        let expected = -(1.0 / (1.0 + (-2.0f64).exp())).ln();
        let l = loss(&theta, Sample { x: &[2.0], y: 1 }).unwrap();
        assert!((l - expected).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_zero_is_closed_form() {
        let theta = ParamVector::<f64>::zeros(Arch::linear(2)).unwrap();
        let x = [0.3, -1.7];
        for y in [0u8, 1] {
            let g = per_sample_grad(&theta, Sample { x: &x, y }).unwrap();
            let r = 0.5 - f64::from(y);
            assert_eq!(g.values, vec![r * 0.3, r * -1.7, r]);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let theta = ParamVector::<f64>::zeros(Arch::linear(2)).unwrap();
        assert!(matches!(
            loss(&theta, Sample { x: &[1.0], y: 0 }),
            Err(Error::Shape { .. })
        ));
        let mlp = ParamVector::<f64>::zeros(Arch::mlp_default(2)).unwrap();
        assert!(per_sample_grad(&mlp, Sample { x: &[1.0, 2.0, 3.0], y: 0 }).is_err());
    }

    #[test]
    fn hessian_single_sample_at_zero() {
        let ds = Dataset::<f64>::with_sequential_ids(vec![2.0, -1.0], 2, vec![1], None).unwrap();
        let theta = ParamVector::<f64>::zeros(Arch::linear(2)).unwrap();
        let lam = 0.3;
        let h = hessian(&theta, &ds, 0.0, lam).unwrap();
        let xt = [2.0, -1.0, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                let expect = 0.25 * xt[i] * xt[j] + if i == j { lam } else { 0.0 };
                assert!((h.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hessian_rejects_mlp() {
        let ds = Dataset::<f64>::with_sequential_ids(vec![2.0, -1.0], 2, vec![1], None).unwrap();
        let theta = ParamVector::<f64>::zeros(Arch::mlp_default(2)).unwrap();
        assert!(matches!(
            hessian(&theta, &ds, 0.0, 0.1),
            Err(Error::UnsupportedArch(_))
        ));
    }

    #[test]
    fn hvp_matches_dense_hessian() {
        let ds = Dataset::<f64>::with_sequential_ids(
            vec![1.0, 0.5, -0.3, 2.0, 0.7, -1.1],
            2,
            vec![1, 0, 1],
            None,
        )
        .unwrap();
        let theta = ParamVector::<f64>::linear(&[0.4, -0.2], 0.1).unwrap();
        let h = hessian(&theta, &ds, 0.0, 0.0).unwrap();
        let v = [0.3, -0.9, 1.2];
        let dense = h.matvec(&v);
        let free = hessian_vector_product(&theta, &ds, None, &v).unwrap();
        assert!(linalg::relative_error(&dense, &free) < 1e-14);
    }
}
