//! Parametric linear operators and the kernels they induce.
//!
//! An operator is a sum of scaled atomic terms (identity, partial
//! derivatives, integrals from zero, a fractional derivative). Applying it
//! to one or both arguments of the base kernel gives the cross- and
//! pair-kernels `k_uf = L_{x'} k_uu`, `k_fu = L_x k_uu`,
//! `k_ff = L_x L_{x'} k_uu`, evaluated here either by closed-form
//! per-dimension rules or, when a fractional term is present, by spectral
//! quadrature.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{se_eval, se_pair_product, DimOp, SEKernelParams};
use crate::spectral::{CheckedSpectral, FreqAtom, SideMultiplier};

/// An atomic operator term. Coefficients live on [`OperatorExpr`] terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomicTerm {
    Identity,
    /// `d^order / d x_dim^order`, order 1 or 2.
    PartialDeriv { dim: usize, order: u32 },
    /// `int_0^{x_dim} . d xi`.
    IntegralFromZero { dim: usize },
    /// Riemann-Liouville derivative in `x_dim`; its order is the
    /// expression's `order_param` slot. Only supported for D = 1.
    FractionalDeriv { dim: usize },
}

/// A term coefficient: either a fixed number or a named parameter slot.
/// `scale` carries structural sign, e.g. a minus written in front of a
/// slot-coefficient term; the slot value itself stays unconstrained (or
/// positive under a log transform).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coefficient {
    Fixed(f64),
    Slot { name: String, scale: f64 },
}

impl Coefficient {
    pub fn slot(name: impl Into<String>) -> Self {
        Coefficient::Slot {
            name: name.into(),
            scale: 1.0,
        }
    }
}

/// One scaled atomic term of an operator expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Coefficient,
    pub atomic: AtomicTerm,
}

/// A parametric linear operator: a sum of scaled atomic terms, plus an
/// optional named slot for the fractional order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorExpr {
    terms: Vec<Term>,
    order_param: Option<String>,
}

impl OperatorExpr {
    /// Validates structural invariants: at least one term, unique slot
    /// names, fractional terms if and only if an order slot is given,
    /// derivative orders in {1, 2}.
    pub fn new(terms: Vec<Term>, order_param: Option<String>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument(
                "operator expression needs at least one term".into(),
            ));
        }
        let mut names: Vec<String> = Vec::new();
        let mut has_fractional = false;
        for term in &terms {
            if let Coefficient::Slot { name, scale } = &term.coeff {
                if !scale.is_finite() || *scale == 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "slot `{name}` has invalid scale {scale}"
                    )));
                }
                if names.iter().any(|n| n == name) {
                    return Err(Error::InvalidArgument(format!(
                        "parameter slot `{name}` bound more than once"
                    )));
                }
                names.push(name.clone());
            }
            match &term.atomic {
                AtomicTerm::PartialDeriv { order, .. } => {
                    if !(*order == 1 || *order == 2) {
                        return Err(Error::InvalidArgument(format!(
                            "partial derivative order must be 1 or 2, got {order}"
                        )));
                    }
                }
                AtomicTerm::FractionalDeriv { .. } => has_fractional = true,
                _ => {}
            }
        }
        match (&order_param, has_fractional) {
            (None, true) => {
                return Err(Error::InvalidArgument(
                    "a fractional term requires an order parameter slot".into(),
                ))
            }
            (Some(_), false) => {
                return Err(Error::InvalidArgument(
                    "an order parameter slot requires a fractional term".into(),
                ))
            }
            (Some(name), true) => {
                if names.iter().any(|n| n == name) {
                    return Err(Error::InvalidArgument(format!(
                        "slot `{name}` cannot bind a fractional order and a coefficient \
                         simultaneously"
                    )));
                }
            }
            (None, false) => {}
        }
        Ok(Self { terms, order_param })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn order_param(&self) -> Option<&str> {
        self.order_param.as_deref()
    }

    pub fn has_fractional(&self) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(t.atomic, AtomicTerm::FractionalDeriv { .. }))
    }

    /// Checks dimension indices against the ambient dimension.
    pub fn validate_for_dim(&self, d: usize) -> Result<()> {
        for term in &self.terms {
            let (dim, fractional) = match term.atomic {
                AtomicTerm::Identity => continue,
                AtomicTerm::PartialDeriv { dim, .. } => (dim, false),
                AtomicTerm::IntegralFromZero { dim } => (dim, false),
                AtomicTerm::FractionalDeriv { dim } => (dim, true),
            };
            if dim >= d {
                return Err(Error::InvalidArgument(format!(
                    "operator term references dimension {dim}, but D = {d}"
                )));
            }
            if fractional && d != 1 {
                return Err(Error::Capability(format!(
                    "fractional terms are supported only for D = 1, got D = {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministically ordered list of parameter slot names, first appearance
/// first. A fractional term contributes its order slot at its own position,
/// after that term's coefficient slot.
pub fn list_params(expr: &OperatorExpr) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |name: &str| {
        if !out.iter().any(|n| n == name) {
            out.push(name.to_string());
        }
    };
    for term in expr.terms() {
        if let Coefficient::Slot { name, .. } = &term.coeff {
            push(name);
        }
        if matches!(term.atomic, AtomicTerm::FractionalDeriv { .. }) {
            if let Some(name) = expr.order_param() {
                push(name);
            }
        }
    }
    out
}

/// Values for the named parameter slots of an operator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorParams(BTreeMap<String, f64>);

impl OperatorParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, name: impl Into<String>, value: f64) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }

    /// Checks that every slot of `expr` is covered and the fractional order
    /// (if any) is positive.
    pub fn validate_for(&self, expr: &OperatorExpr) -> Result<()> {
        for name in list_params(expr) {
            let value = self.get(&name).ok_or_else(|| {
                Error::Configuration(format!("missing value for parameter slot `{name}`"))
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "parameter slot `{name}` has non-finite value {value}"
                )));
            }
        }
        if let Some(name) = expr.order_param() {
            let alpha = self.get(name).unwrap_or(f64::NAN);
            if !(alpha > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "fractional order `{name}` must be positive, got {alpha}"
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, f64)> for OperatorParams {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Evaluation route decided once per (expr, phi, theta) triple.
#[derive(Debug, Clone)]
enum Route {
    /// Resolved (coefficient, atomic) pairs evaluated by per-dimension
    /// closed-form rules.
    ClosedForm(Vec<(f64, AtomicTerm)>),
    /// Fractional expressions: precomputed quadrature tables for the
    /// single-sided and pair kernels.
    Spectral {
        uf: CheckedSpectral,
        ff: CheckedSpectral,
    },
}

/// Kernel evaluator for a fixed operator, parameter set and base kernel.
/// Construction resolves slots and (for fractional operators) builds the
/// spectral quadrature tables, so per-entry evaluation is cheap.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    theta: SEKernelParams,
    route: Route,
}

impl KernelEvaluator {
    pub fn new(
        expr: &OperatorExpr,
        phi: &OperatorParams,
        theta: &SEKernelParams,
    ) -> Result<Self> {
        expr.validate_for_dim(theta.dim())?;
        phi.validate_for(expr)?;
        let resolved: Vec<(f64, AtomicTerm)> = expr
            .terms()
            .iter()
            .map(|term| {
                let c = match &term.coeff {
                    Coefficient::Fixed(v) => *v,
                    // validate_for guarantees presence
                    Coefficient::Slot { name, scale } => scale * phi.get(name).unwrap(),
                };
                (c, term.atomic.clone())
            })
            .collect();

        let route = if expr.has_fractional() {
            let mut atoms = Vec::with_capacity(resolved.len());
            for (c, atomic) in &resolved {
                let atom = match atomic {
                    AtomicTerm::Identity => FreqAtom::One,
                    AtomicTerm::PartialDeriv { order, .. } => FreqAtom::Deriv(*order),
                    AtomicTerm::FractionalDeriv { .. } => {
                        let name = expr.order_param().unwrap();
                        FreqAtom::Fractional(phi.get(name).unwrap())
                    }
                    AtomicTerm::IntegralFromZero { .. } => {
                        return Err(Error::Capability(
                            "integral terms cannot be combined with fractional terms".into(),
                        ))
                    }
                };
                atoms.push((*c, atom));
            }
            let multiplier = SideMultiplier::new(atoms);
            let identity = SideMultiplier::identity();
            let variance = theta.variance();
            let weight = theta.weights()[0];
            Route::Spectral {
                uf: CheckedSpectral::build(&identity, &multiplier, variance, weight),
                ff: CheckedSpectral::build(&multiplier, &multiplier, variance, weight),
            }
        } else {
            Route::ClosedForm(resolved)
        };

        Ok(Self {
            theta: theta.clone(),
            route,
        })
    }

    /// Runs the quadrature convergence check at the given lags; a no-op for
    /// closed-form routes.
    pub fn validate_probes(&self, taus: &[f64]) -> Result<()> {
        if let Route::Spectral { uf, ff } = &self.route {
            uf.validate(taus)?;
            ff.validate(taus)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// Base kernel `k_uu`.
    pub fn uu(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        se_eval(&self.theta, x, x2)
    }

    /// Cross kernel `k_uf(x, x') = L_{x'} k_uu(x, x')`.
    pub fn uf(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        match &self.route {
            Route::ClosedForm(terms) => {
                let mut acc = 0.0;
                for (c, atomic) in terms {
                    acc += c * self.pair_closed(&AtomicTerm::Identity, atomic, x, x2)?;
                }
                Ok(acc)
            }
            Route::Spectral { uf, .. } => {
                check_dims_1d(x, x2)?;
                Ok(uf.eval(x[0] - x2[0]))
            }
        }
    }

    /// Cross kernel `k_fu(x, x') = L_x k_uu(x, x')`; equals `k_uf(x', x)`
    /// exactly, which is how it is computed.
    pub fn fu(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.uf(x2, x)
    }

    /// Pair kernel `k_ff = L_x L_{x'} k_uu` by bilinear expansion.
    pub fn ff(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        match &self.route {
            Route::ClosedForm(terms) => {
                let mut acc = 0.0;
                for (cj, aj) in terms {
                    for (cl, al) in terms {
                        acc += cj * cl * self.pair_closed(aj, al, x, x2)?;
                    }
                }
                Ok(acc)
            }
            Route::Spectral { ff, .. } => {
                check_dims_1d(x, x2)?;
                Ok(ff.eval(x[0] - x2[0]))
            }
        }
    }

    fn pair_closed(
        &self,
        left: &AtomicTerm,
        right: &AtomicTerm,
        x: &[f64],
        x2: &[f64],
    ) -> Result<f64> {
        let d = self.theta.dim();
        if x.len() != d || x2.len() != d {
            return Err(Error::InvalidArgument(format!(
                "points have dimensions {} and {}, kernel expects {d}",
                x.len(),
                x2.len()
            )));
        }
        // The closed-form route never holds fractional terms, so dim_op
        // cannot fail here.
        se_pair_product(&self.theta, x, x2, |dim| {
            (
                dim_op(left, dim).expect("closed-form atomic"),
                dim_op(right, dim).expect("closed-form atomic"),
            )
        })
    }
}

fn check_dims_1d(x: &[f64], x2: &[f64]) -> Result<()> {
    if x.len() != 1 || x2.len() != 1 {
        return Err(Error::InvalidArgument(
            "fractional kernels take one-dimensional points".into(),
        ));
    }
    Ok(())
}

/// The 1-D transform an atomic term applies in the given dimension.
fn dim_op(atomic: &AtomicTerm, dim: usize) -> Result<DimOp> {
    Ok(match atomic {
        AtomicTerm::Identity => DimOp::Deriv(0),
        AtomicTerm::PartialDeriv { dim: d, order } => {
            if *d == dim {
                DimOp::Deriv(*order)
            } else {
                DimOp::Deriv(0)
            }
        }
        AtomicTerm::IntegralFromZero { dim: d } => {
            if *d == dim {
                DimOp::Integral
            } else {
                DimOp::Deriv(0)
            }
        }
        AtomicTerm::FractionalDeriv { .. } => {
            return Err(Error::Capability(
                "fractional terms have no closed-form rule; use the spectral route".into(),
            ))
        }
    })
}

/// `k_ff(x, x') = L_x L_{x'} k_uu(x, x')` for a one-off evaluation.
pub fn kernel_ff(
    expr: &OperatorExpr,
    phi: &OperatorParams,
    theta: &SEKernelParams,
    x: &[f64],
    x2: &[f64],
) -> Result<f64> {
    let eval = KernelEvaluator::new(expr, phi, theta)?;
    if theta.dim() == 1 {
        eval.validate_probes(&[x[0] - x2[0]])?;
    }
    eval.ff(x, x2)
}

/// `k_uf(x, x') = L_{x'} k_uu(x, x')` for a one-off evaluation.
pub fn kernel_uf(
    expr: &OperatorExpr,
    phi: &OperatorParams,
    theta: &SEKernelParams,
    x: &[f64],
    x2: &[f64],
) -> Result<f64> {
    let eval = KernelEvaluator::new(expr, phi, theta)?;
    if theta.dim() == 1 {
        eval.validate_probes(&[x[0] - x2[0]])?;
    }
    eval.uf(x, x2)
}

/// `k_fu(x, x') = L_x k_uu(x, x')` for a one-off evaluation.
pub fn kernel_fu(
    expr: &OperatorExpr,
    phi: &OperatorParams,
    theta: &SEKernelParams,
    x: &[f64],
    x2: &[f64],
) -> Result<f64> {
    kernel_uf(expr, phi, theta, x2, x)
}
