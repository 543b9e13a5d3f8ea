//! Joint covariance assembly, marginal likelihood, and posterior prediction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dataset::JointDataset;
use crate::error::{Error, Result};
use crate::kernel::SEKernelParams;
use crate::operator::{KernelEvaluator, OperatorExpr, OperatorParams};

/// Full parameter set of the joint model: kernel hyperparameters, operator
/// parameters, and the two observation noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kernel: SEKernelParams,
    pub operator: OperatorParams,
    pub noise_u: f64,
    pub noise_f: f64,
}

impl ModelParams {
    pub fn new(
        kernel: SEKernelParams,
        operator: OperatorParams,
        noise_u: f64,
        noise_f: f64,
    ) -> Result<Self> {
        for (name, v) in [("noise_u", noise_u), ("noise_f", noise_f)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be a nonnegative finite variance, got {v}"
                )));
            }
        }
        Ok(Self {
            kernel,
            operator,
            noise_u,
            noise_f,
        })
    }
}

/// Which posterior is being queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    U,
    F,
}

/// Posterior mean and standard deviation at a set of query points.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub points: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub target: Target,
    /// Largest negative predictive variance that was clamped to zero;
    /// round-off near training points makes small negatives expected.
    pub max_variance_clamp: f64,
}

/// Spectral-quadrature probe lags covering every pair of 1-D points.
fn spectral_probes(point_sets: &[&[Vec<f64>]]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for set in point_sets {
        for p in set.iter() {
            if p.len() == 1 {
                lo = lo.min(p[0]);
                hi = hi.max(p[0]);
            }
        }
    }
    if lo > hi {
        return vec![0.0];
    }
    let range = hi - lo;
    vec![0.0, 0.5 * range, range]
}

/// Assembles the joint covariance
/// `[[k_uu + s_u^2 I, k_uf], [k_fu, k_ff + s_f^2 I]]`, mirroring the
/// off-diagonal block so the result is exactly symmetric.
pub fn assemble_k(
    data: &JointDataset,
    expr: &OperatorExpr,
    params: &ModelParams,
) -> Result<DMatrix<f64>> {
    let eval = KernelEvaluator::new(expr, &params.operator, &params.kernel)?;
    eval.validate_probes(&spectral_probes(&[data.x_u(), data.x_f()]))?;
    assemble_k_with(&eval, data, params.noise_u, params.noise_f)
}

pub(crate) fn assemble_k_with(
    eval: &KernelEvaluator,
    data: &JointDataset,
    noise_u: f64,
    noise_f: f64,
) -> Result<DMatrix<f64>> {
    let n_u = data.n_u();
    let n_f = data.n_f();
    let n = n_u + n_f;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n_u {
        for j in i..n_u {
            let v = eval.uu(&data.x_u()[i], &data.x_u()[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise_u;
    }
    for i in 0..n_u {
        for j in 0..n_f {
            let v = eval.uf(&data.x_u()[i], &data.x_f()[j])?;
            k[(i, n_u + j)] = v;
            k[(n_u + j, i)] = v;
        }
    }
    for i in 0..n_f {
        for j in i..n_f {
            let v = eval.ff(&data.x_f()[i], &data.x_f()[j])?;
            k[(n_u + i, n_u + j)] = v;
            k[(n_u + j, n_u + i)] = v;
        }
        k[(n_u + i, n_u + i)] += noise_f;
    }
    Ok(k)
}

/// Cholesky factorization with an adaptive diagonal jitter: starts at
/// `1e-10 * mean(diag K)` and grows tenfold up to `1e-4 * mean(diag K)`.
pub(crate) fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mean_diag = k.diagonal().sum() / n as f64;
    if !(mean_diag > 0.0 && mean_diag.is_finite()) {
        return Err(Error::Numerical(format!(
            "covariance diagonal mean {mean_diag} is not positive"
        )));
    }
    // Floors keep the escalation loop finite when the diagonal underflows
    // toward the subnormal range.
    let max_jitter = (1e-4 * mean_diag).max(f64::MIN_POSITIVE * 1e16);
    let mut jitter = (1e-10 * mean_diag).max(f64::MIN_POSITIVE * 1e10);
    for _ in 0..64 {
        let mut jittered = k.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
        if jitter > max_jitter {
            break;
        }
    }
    Err(Error::Numerical(format!(
        "covariance is not positive definite even with jitter {max_jitter:.3e} \
         (mean diagonal {mean_diag:.3e})"
    )))
}

/// Negative log marginal likelihood and the jitter that was needed.
#[derive(Debug, Clone, Copy)]
pub struct NlmlBreakdown {
    pub value: f64,
    pub jitter: f64,
}

/// `1/2 y^T K^{-1} y + 1/2 log|K| + n/2 log(2 pi)` via Cholesky.
pub fn nlml(data: &JointDataset, expr: &OperatorExpr, params: &ModelParams) -> Result<f64> {
    nlml_breakdown(data, expr, params).map(|b| b.value)
}

pub fn nlml_breakdown(
    data: &JointDataset,
    expr: &OperatorExpr,
    params: &ModelParams,
) -> Result<NlmlBreakdown> {
    let k = assemble_k(data, expr, params)?;
    let (chol, jitter) = cholesky_with_jitter(&k)?;
    let y = DVector::from_vec(data.y_joint());
    Ok(NlmlBreakdown {
        value: nlml_from_parts(&chol, &y),
        jitter,
    })
}

fn nlml_from_parts(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let alpha = chol.solve(y);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    0.5 * y.dot(&alpha) + 0.5 * log_det + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// A trained model: parameters plus the factorized joint covariance over its
/// training data. Immutable; posterior queries may run concurrently.
#[derive(Debug, Clone)]
pub struct FittedModel {
    params: ModelParams,
    expr: OperatorExpr,
    data: JointDataset,
    eval: KernelEvaluator,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    nlml: f64,
}

impl FittedModel {
    pub fn new(data: JointDataset, expr: OperatorExpr, params: ModelParams) -> Result<Self> {
        let eval = KernelEvaluator::new(&expr, &params.operator, &params.kernel)?;
        eval.validate_probes(&spectral_probes(&[data.x_u(), data.x_f()]))?;
        let k = assemble_k_with(&eval, &data, params.noise_u, params.noise_f)?;
        let (chol, jitter) = cholesky_with_jitter(&k)?;
        let y = DVector::from_vec(data.y_joint());
        let nlml = nlml_from_parts(&chol, &y);
        let alpha = chol.solve(&y);
        Ok(Self {
            params,
            expr,
            data,
            eval,
            chol,
            alpha,
            jitter,
            nlml,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn expr(&self) -> &OperatorExpr {
        &self.expr
    }

    pub fn data(&self) -> &JointDataset {
        &self.data
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn nlml(&self) -> f64 {
        self.nlml
    }

    /// Lower-triangular Cholesky factor of `K + jitter I`.
    pub fn chol_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Posterior mean and standard deviation of `u` or `f` at query points.
    pub fn posterior(&self, points: &[Vec<f64>], target: Target) -> Result<Posterior> {
        self.eval
            .validate_probes(&spectral_probes(&[self.data.x_u(), self.data.x_f(), points]))?;
        let n_u = self.data.n_u();
        let n_f = self.data.n_f();
        let n = n_u + n_f;
        let mut mean = Vec::with_capacity(points.len());
        let mut std = Vec::with_capacity(points.len());
        let mut max_clamp = 0.0f64;
        for x in points {
            let mut q = DVector::<f64>::zeros(n);
            let k_tt = match target {
                Target::U => {
                    for i in 0..n_u {
                        q[i] = self.eval.uu(x, &self.data.x_u()[i])?;
                    }
                    for j in 0..n_f {
                        q[n_u + j] = self.eval.uf(x, &self.data.x_f()[j])?;
                    }
                    self.eval.uu(x, x)?
                }
                Target::F => {
                    for i in 0..n_u {
                        q[i] = self.eval.fu(x, &self.data.x_u()[i])?;
                    }
                    for j in 0..n_f {
                        q[n_u + j] = self.eval.ff(x, &self.data.x_f()[j])?;
                    }
                    self.eval.ff(x, x)?
                }
            };
            let solved = self.chol.solve(&q);
            mean.push(q.dot(&self.alpha));
            let variance = k_tt - q.dot(&solved);
            if variance < 0.0 {
                max_clamp = max_clamp.max(-variance);
            }
            std.push(variance.max(0.0).sqrt());
        }
        Ok(Posterior {
            points: points.to_vec(),
            mean,
            std,
            target,
            max_variance_clamp: max_clamp,
        })
    }
}

/// `||pred - truth||_2 / ||truth||_2`.
pub fn relative_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let norm: f64 = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "relative L2 error is undefined for a zero-norm reference".into(),
        ));
    }
    let diff: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{AtomicTerm, Coefficient, Term};

    fn identity_expr() -> OperatorExpr {
        OperatorExpr::new(
            vec![Term {
                coeff: Coefficient::Fixed(1.0),
                atomic: AtomicTerm::Identity,
            }],
            None,
        )
        .unwrap()
    }

    fn params_1d(noise_u: f64, noise_f: f64) -> ModelParams {
        ModelParams::new(
            SEKernelParams::new(1.0, vec![1.0]).unwrap(),
            OperatorParams::new(),
            noise_u,
            noise_f,
        )
        .unwrap()
    }

    #[test]
    fn single_point_matrix_is_variance() {
        let data = JointDataset::new(vec![vec![0.3]], vec![1.0], vec![], vec![]).unwrap();
        let k = assemble_k(&data, &identity_expr(), &params_1d(0.0, 0.0)).unwrap();
        assert_eq!(k.nrows(), 1);
        assert_eq!(k[(0, 0)], 1.0);
    }

    #[test]
    fn identity_operator_blocks_coincide() {
        let points = vec![vec![0.1], vec![0.7], vec![0.4]];
        let data = JointDataset::new(
            points.clone(),
            vec![1.0, 2.0, 3.0],
            points.clone(),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let k = assemble_k(&data, &identity_expr(), &params_1d(0.0, 0.0)).unwrap();
        let n = 3;
        for i in 0..n {
            for j in 0..n {
                let uu = k[(i, j)];
                assert_eq!(uu, k[(i, n + j)]);
                assert_eq!(uu, k[(n + i, j)]);
                assert_eq!(uu, k[(n + i, n + j)]);
            }
        }
        // exactly symmetric by construction
        assert_eq!(k.clone(), k.transpose());

        // noise lands on the right diagonals
        let noisy = assemble_k(&data, &identity_expr(), &params_1d(1e-3, 1e-2)).unwrap();
        for i in 0..n {
            assert!((noisy[(i, i)] - k[(i, i)] - 1e-3).abs() < 1e-15);
            assert!((noisy[(n + i, n + i)] - k[(n + i, n + i)] - 1e-2).abs() < 1e-15);
        }
    }

    #[test]
    fn nlml_closed_form_1x1() {
        // n=1, K=[[1]], y=[0] -> 0.5 ln(2 pi)
        let data = JointDataset::new(vec![vec![0.0]], vec![0.0], vec![], vec![]).unwrap();
        let v = nlml(&data, &identity_expr(), &params_1d(0.0, 0.0)).unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
        assert!((v - 0.918939).abs() < 1e-6);

        // y=[1] adds 1/2
        let data = JointDataset::new(vec![vec![0.0]], vec![1.0], vec![], vec![]).unwrap();
        let v = nlml(&data, &identity_expr(), &params_1d(0.0, 0.0)).unwrap();
        assert!((v - (0.5 + expect)).abs() < 1e-8, "{v}");
        assert!((v - 1.418939).abs() < 1e-6);
    }

    #[test]
    fn zero_observations_leave_only_det_and_constant() {
        let data = JointDataset::new(
            vec![vec![0.1], vec![0.5], vec![0.9]],
            vec![0.0; 3],
            vec![],
            vec![],
        )
        .unwrap();
        let params = params_1d(1e-4, 0.0);
        let b = nlml_breakdown(&data, &identity_expr(), &params).unwrap();
        let k = assemble_k(&data, &identity_expr(), &params).unwrap();
        let (chol, _) = cholesky_with_jitter(&k).unwrap();
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let expect = 0.5 * log_det + 1.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((b.value - expect).abs() < 1e-10);
    }

    #[test]
    fn relative_l2_values() {
        assert_eq!(relative_l2(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(relative_l2(&[6.0, 8.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(relative_l2(&[3.0, 9.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!(relative_l2(&[1.0], &[0.0]).is_err());
        assert!(relative_l2(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn model_params_reject_negative_noise() {
        assert!(ModelParams::new(
            SEKernelParams::new(1.0, vec![1.0]).unwrap(),
            OperatorParams::new(),
            -1e-3,
            0.0,
        )
        .is_err());
    }
}
