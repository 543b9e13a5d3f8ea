//! Squared-exponential ARD kernel and its closed-form derivative and
//! antiderivative building blocks.
//!
//! The base kernel is
//!
//! ```text
//! k_uu(x, x') = sigma_u^2 * exp(-1/2 * sum_d w_d (x_d - x'_d)^2)
//! ```
//!
//! which factorizes over dimensions into stationary Gaussian factors
//! `g(tau) = exp(-w tau^2 / 2)`. Everything a linear operator can do to the
//! kernel (differentiate either argument, integrate either argument from 0)
//! reduces to per-dimension transforms of `g`, evaluated here in closed form:
//!
//! * derivatives via the probabilists' Hermite recursion,
//! * single antiderivatives via `Phi_w(z) = sqrt(pi/(2w)) * erf(sqrt(w/2) z)`,
//! * the double antiderivative via `h(z) = z Phi_w(z) + exp(-w z^2/2)/w`.

use crate::error::{Error, Result};

/// Maximum supported combined derivative order per dimension.
pub const MAX_DERIV_ORDER: u32 = 4;

/// Hyperparameters of the squared-exponential ARD kernel: a signal variance
/// and one inverse-squared-length-scale weight per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SEKernelParams {
    variance: f64,
    weights: Vec<f64>,
}

impl SEKernelParams {
    /// Validates `variance > 0` and every weight `> 0`.
    pub fn new(variance: f64, weights: Vec<f64>) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel variance must be positive and finite, got {variance}"
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidArgument(
                "kernel needs at least one ARD weight".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "ARD weights must be positive and finite, got {w}"
            )));
        }
        Ok(Self { variance, weights })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Input dimension `D`.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check_point(&self, name: &str, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "{name} has dimension {}, kernel expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Which argument of the kernel an antiderivative acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralSide {
    Left,
    Right,
}

/// One-dimensional transform applied to a stationary factor on one side.
/// This is the unit the operator algebra dispatches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DimOp {
    /// `Deriv(0)` is the identity.
    Deriv(u32),
    /// Antiderivative from 0 to the argument.
    Integral,
}

/// Product over dimensions of transformed stationary factors, times the
/// signal variance. Untransformed dimensions accumulate into a single
/// exponent so that the zero-order case reproduces [`se_eval`] bit for bit.
pub(crate) fn se_pair_product(
    params: &SEKernelParams,
    x: &[f64],
    x2: &[f64],
    op_for_dim: impl Fn(usize) -> (DimOp, DimOp),
) -> Result<f64> {
    let mut quad = 0.0;
    let mut factor = 1.0;
    for (d, w) in params.weights.iter().enumerate() {
        match op_for_dim(d) {
            (DimOp::Deriv(0), DimOp::Deriv(0)) => {
                quad += w * (x[d] - x2[d]) * (x[d] - x2[d]);
            }
            (left, right) => {
                factor *= pair_factor_1d(*w, x[d], x2[d], left, right)?;
            }
        }
    }
    Ok(params.variance * factor * (-0.5 * quad).exp())
}

/// k-th derivative of `g(tau) = exp(-w tau^2 / 2)`:
/// `g^(k)(tau) = (-sqrt(w))^k He_k(sqrt(w) tau) g(tau)`
/// with the probabilists' Hermite recursion
/// `He_{k+1}(s) = s He_k(s) - k He_{k-1}(s)`.
pub(crate) fn gauss_deriv(w: f64, tau: f64, k: u32) -> f64 {
    let s = w.sqrt() * tau;
    let mut he_prev = 1.0; // He_0
    let mut he = s; // He_1
    let he_k = match k {
        0 => he_prev,
        1 => he,
        _ => {
            for j in 1..k {
                let next = s * he - (j as f64) * he_prev;
                he_prev = he;
                he = next;
            }
            he
        }
    };
    (-w.sqrt()).powi(k as i32) * he_k * (-0.5 * w * tau * tau).exp()
}

/// `Phi_w(z) = int_0^z g(t) dt = sqrt(pi/(2w)) erf(sqrt(w/2) z)`.
pub(crate) fn phi(w: f64, z: f64) -> f64 {
    (std::f64::consts::PI / (2.0 * w)).sqrt() * libm::erf((0.5 * w).sqrt() * z)
}

/// `h(z) = z Phi_w(z) + exp(-w z^2 / 2) / w`; h is even and h' = Phi_w.
pub(crate) fn h_fn(w: f64, z: f64) -> f64 {
    z * phi(w, z) + (-0.5 * w * z * z).exp() / w
}

/// Applies a pair of one-dimensional transforms (left on argument `a`, right
/// on argument `b`) to the stationary factor `g(a - b)`.
pub(crate) fn pair_factor_1d(w: f64, a: f64, b: f64, left: DimOp, right: DimOp) -> Result<f64> {
    use DimOp::*;
    match (left, right) {
        (Deriv(m), Deriv(n)) => {
            if m + n > MAX_DERIV_ORDER {
                return Err(Error::Capability(format!(
                    "combined derivative order {} exceeds the supported maximum {}",
                    m + n,
                    MAX_DERIV_ORDER
                )));
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * gauss_deriv(w, a - b, m + n))
        }
        // int_0^a g(xi - b) dxi
        (Integral, Deriv(0)) => Ok(phi(w, a - b) + phi(w, b)),
        // int_0^b g(a - xi) dxi
        (Deriv(0), Integral) => Ok(phi(w, a) - phi(w, a - b)),
        // d^m/da^m of the row above
        (Deriv(m), Integral) => {
            if m > MAX_DERIV_ORDER {
                return Err(Error::Capability(format!(
                    "derivative order {m} exceeds the supported maximum {MAX_DERIV_ORDER}"
                )));
            }
            Ok(gauss_deriv(w, a, m - 1) - gauss_deriv(w, a - b, m - 1))
        }
        // int_0^a (-1)^n g^(n)(xi - b) dxi
        (Integral, Deriv(n)) => {
            if n > MAX_DERIV_ORDER {
                return Err(Error::Capability(format!(
                    "derivative order {n} exceeds the supported maximum {MAX_DERIV_ORDER}"
                )));
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * (gauss_deriv(w, a - b, n - 1) - gauss_deriv(w, -b, n - 1)))
        }
        (Integral, Integral) => Ok(h_fn(w, a) + h_fn(w, b) - h_fn(w, a - b) - 1.0 / w),
    }
}

/// Evaluates the squared-exponential ARD kernel at a pair of points.
pub fn se_eval(params: &SEKernelParams, x: &[f64], x2: &[f64]) -> Result<f64> {
    params.check_point("x", x)?;
    params.check_point("x2", x2)?;
    let quad: f64 = params
        .weights
        .iter()
        .zip(x.iter().zip(x2))
        .map(|(w, (a, b))| w * (a - b) * (a - b))
        .sum();
    Ok(params.variance * (-0.5 * quad).exp())
}

/// Mixed partial derivative of the kernel: `orders_left[d]` derivatives in
/// `x_d` and `orders_right[d]` derivatives in `x2_d`, each combined order
/// capped at [`MAX_DERIV_ORDER`].
pub fn se_partial(
    params: &SEKernelParams,
    x: &[f64],
    x2: &[f64],
    orders_left: &[u32],
    orders_right: &[u32],
) -> Result<f64> {
    params.check_point("x", x)?;
    params.check_point("x2", x2)?;
    if orders_left.len() != params.dim() || orders_right.len() != params.dim() {
        return Err(Error::InvalidArgument(format!(
            "derivative order lists must have length {}",
            params.dim()
        )));
    }
    se_pair_product(params, x, x2, |d| {
        (DimOp::Deriv(orders_left[d]), DimOp::Deriv(orders_right[d]))
    })
}

/// Antiderivative of the kernel from 0 to the `dim`-th coordinate of the
/// chosen argument, all other dimensions untouched.
pub fn se_antideriv(
    params: &SEKernelParams,
    dim: usize,
    x: &[f64],
    x2: &[f64],
    side: IntegralSide,
) -> Result<f64> {
    params.check_point("x", x)?;
    params.check_point("x2", x2)?;
    if dim >= params.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension index {dim} out of range for D={}",
            params.dim()
        )));
    }
    se_pair_product(params, x, x2, |d| {
        if d == dim {
            match side {
                IntegralSide::Left => (DimOp::Integral, DimOp::Deriv(0)),
                IntegralSide::Right => (DimOp::Deriv(0), DimOp::Integral),
            }
        } else {
            (DimOp::Deriv(0), DimOp::Deriv(0))
        }
    })
}

/// Double antiderivative: integral from 0 in the `dim`-th coordinate of both
/// arguments.
pub fn se_double_antideriv(
    params: &SEKernelParams,
    dim: usize,
    x: &[f64],
    x2: &[f64],
) -> Result<f64> {
    params.check_point("x", x)?;
    params.check_point("x2", x2)?;
    if dim >= params.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimension index {dim} out of range for D={}",
            params.dim()
        )));
    }
    se_pair_product(params, x, x2, |d| {
        if d == dim {
            (DimOp::Integral, DimOp::Integral)
        } else {
            (DimOp::Deriv(0), DimOp::Deriv(0))
        }
    })
}
