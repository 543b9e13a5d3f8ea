//! Marginal-likelihood maximization over kernel hyperparameters, operator
//! parameters and noise variances.
//!
//! All positive quantities (signal variance, ARD weights, trained noise
//! variances, fractional orders) train in log space; operator coefficient
//! slots use the transform table (identity by default, so signs stay free).
//! Gradients come from central finite differences on the transformed vector
//! and each restart runs an independent L-BFGS from a randomized start.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::JointDataset;
use crate::error::{Error, Result};
use crate::gp::{nlml, FittedModel, ModelParams};
use crate::kernel::SEKernelParams;
use crate::operator::{list_params, OperatorExpr, OperatorParams};
use crate::optim::{minimize, LbfgsOptions};

/// How a trainable quantity is represented in the unconstrained vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Log,
    Identity,
}

impl Transform {
    fn pack(self, value: f64, name: &str) -> Result<f64> {
        match self {
            Transform::Identity => Ok(value),
            Transform::Log => {
                if value > 0.0 {
                    Ok(value.ln())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "`{name}` must be positive for a log transform, got {value}"
                    )))
                }
            }
        }
    }

    fn unpack(self, raw: f64) -> f64 {
        match self {
            Transform::Identity => raw,
            Transform::Log => raw.exp(),
        }
    }
}

/// Whether a noise variance is trained or held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum NoiseMode {
    Trained,
    Fixed(f64),
}

/// Optimizer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub grad_tol: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    pub seed: u64,
    pub noise_u: NoiseMode,
    pub noise_f: NoiseMode,
    /// Transform per operator slot; slots not listed use `Identity`.
    /// Fractional-order slots are always log-transformed.
    pub transforms: BTreeMap<String, Transform>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 200,
            grad_tol: 1e-5,
            fd_step: 1e-6,
            seed: 0,
            noise_u: NoiseMode::Trained,
            noise_f: NoiseMode::Trained,
            transforms: BTreeMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be positive".into()));
        }
        if !(1e-9..=1e-3).contains(&self.fd_step) {
            return Err(Error::InvalidArgument(format!(
                "fd_step must lie in [1e-9, 1e-3], got {}",
                self.fd_step
            )));
        }
        for (name, noise) in [("noise_u", self.noise_u), ("noise_f", self.noise_f)] {
            if let NoiseMode::Fixed(v) = noise {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "fixed {name} must be a nonnegative variance, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_fixed_noise(mut self, value: f64) -> Self {
        self.noise_u = NoiseMode::Fixed(value);
        self.noise_f = NoiseMode::Fixed(value);
        self
    }

    pub fn with_transform(mut self, slot: &str, transform: Transform) -> Self {
        self.transforms.insert(slot.to_string(), transform);
        self
    }
}

/// Maps between [`ModelParams`] and the unconstrained optimizer vector.
/// Layout: `[variance, weights.., operator slots.., noise_u?, noise_f?]`.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    dim: usize,
    slots: Vec<(String, Transform)>,
    noise_u: NoiseMode,
    noise_f: NoiseMode,
}

impl ParamLayout {
    pub fn new(expr: &OperatorExpr, dim: usize, cfg: &TrainConfig) -> Result<Self> {
        let slot_names = list_params(expr);
        for name in cfg.transforms.keys() {
            if !slot_names.iter().any(|s| s == name) {
                return Err(Error::Configuration(format!(
                    "transform table names unknown parameter slot `{name}`"
                )));
            }
        }
        let slots = slot_names
            .into_iter()
            .map(|name| {
                let transform = if expr.order_param() == Some(name.as_str()) {
                    Transform::Log
                } else {
                    cfg.transforms
                        .get(&name)
                        .copied()
                        .unwrap_or(Transform::Identity)
                };
                (name, transform)
            })
            .collect();
        Ok(Self {
            dim,
            slots,
            noise_u: cfg.noise_u,
            noise_f: cfg.noise_f,
        })
    }

    pub fn len(&self) -> usize {
        1 + self.dim
            + self.slots.len()
            + matches!(self.noise_u, NoiseMode::Trained) as usize
            + matches!(self.noise_f, NoiseMode::Trained) as usize
    }

    pub fn slots(&self) -> &[(String, Transform)] {
        &self.slots
    }

    /// Packs parameters into the unconstrained vector; log-transformed
    /// entries store `ln(value)`.
    pub fn pack(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(self.len());
        v.push(Transform::Log.pack(params.kernel.variance(), "variance")?);
        if params.kernel.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "kernel has {} weights, layout expects {}",
                params.kernel.dim(),
                self.dim
            )));
        }
        for (d, w) in params.kernel.weights().iter().enumerate() {
            v.push(Transform::Log.pack(*w, &format!("weight[{d}]"))?);
        }
        for (name, transform) in &self.slots {
            let value = params.operator.get(name).ok_or_else(|| {
                Error::Configuration(format!("missing value for parameter slot `{name}`"))
            })?;
            v.push(transform.pack(value, name)?);
        }
        if matches!(self.noise_u, NoiseMode::Trained) {
            v.push(Transform::Log.pack(params.noise_u, "noise_u")?);
        }
        if matches!(self.noise_f, NoiseMode::Trained) {
            v.push(Transform::Log.pack(params.noise_f, "noise_f")?);
        }
        Ok(v)
    }

    /// Inverse of [`ParamLayout::pack`]; positivity of log-transformed
    /// quantities holds by construction.
    pub fn unpack(&self, v: &[f64]) -> Result<ModelParams> {
        if v.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has length {}, layout expects {}",
                v.len(),
                self.len()
            )));
        }
        let mut at = 0;
        let mut take = || {
            let x = v[at];
            at += 1;
            x
        };
        let variance = Transform::Log.unpack(take());
        let weights: Vec<f64> = (0..self.dim).map(|_| Transform::Log.unpack(take())).collect();
        let mut operator = OperatorParams::new();
        for (name, transform) in &self.slots {
            operator.insert(name.clone(), transform.unpack(take()));
        }
        let noise_u = match self.noise_u {
            NoiseMode::Trained => Transform::Log.unpack(take()),
            NoiseMode::Fixed(value) => value,
        };
        let noise_f = match self.noise_f {
            NoiseMode::Trained => Transform::Log.unpack(take()),
            NoiseMode::Fixed(value) => value,
        };
        ModelParams::new(SEKernelParams::new(variance, weights)?, operator, noise_u, noise_f)
    }
}

/// Central-difference gradient with per-coordinate step
/// `h_i = fd_step * max(|v_i|, 1)`.
pub fn fd_gradient(
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    v: &[f64],
    fd_step: f64,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(v.len());
    let mut probe = v.to_vec();
    for i in 0..v.len() {
        let h = fd_step * v[i].abs().max(1.0);
        probe[i] = v[i] + h;
        let plus = finite_probe(objective, &probe, i)?;
        probe[i] = v[i] - h;
        let minus = finite_probe(objective, &probe, i)?;
        probe[i] = v[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

fn finite_probe(
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    probe: &[f64],
    coord: usize,
) -> Result<f64> {
    let value = objective(probe).map_err(|e| {
        Error::Numerical(format!(
            "objective failed at finite-difference probe for coordinate {coord}: {e}"
        ))
    })?;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "objective is not finite at finite-difference probe for coordinate {coord}"
        )));
    }
    Ok(value)
}

/// Result of one restart.
#[derive(Debug, Clone)]
pub enum RestartOutcome {
    Converged { nlml: f64, iterations: usize },
    Stopped { nlml: f64, iterations: usize },
    Failed(String),
}

impl RestartOutcome {
    pub fn nlml(&self) -> Option<f64> {
        match self {
            RestartOutcome::Converged { nlml, .. } | RestartOutcome::Stopped { nlml, .. } => {
                Some(*nlml)
            }
            RestartOutcome::Failed(_) => None,
        }
    }
}

/// Summary of a completed fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub best_params: ModelParams,
    pub best_nlml: f64,
    pub restarts: Vec<RestartOutcome>,
    /// Iterations used by the winning restart.
    pub iterations: usize,
    /// Gradient infinity norm at the winning restart's final point.
    pub final_grad_norm: f64,
    pub wall_time: Duration,
}

/// Runs `cfg.restarts` independent L-BFGS runs from randomized starting
/// points and returns the model with the smallest negative log marginal
/// likelihood.
pub fn fit(
    data: &JointDataset,
    expr: &OperatorExpr,
    cfg: &TrainConfig,
) -> Result<(FittedModel, FitReport)> {
    cfg.validate()?;
    expr.validate_for_dim(data.dim())?;
    let start = Instant::now();
    let layout = ParamLayout::new(expr, data.dim(), cfg)?;

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let restart_seeds: Vec<u64> = (0..cfg.restarts).map(|_| master.random()).collect();

    let opts = LbfgsOptions {
        max_iters: cfg.max_iters,
        grad_tol: cfg.grad_tol,
        max_fevals: cfg.max_iters.saturating_mul(250),
        ..Default::default()
    };

    let mut outcomes = Vec::with_capacity(cfg.restarts);
    let mut best: Option<(f64, Vec<f64>, usize, f64)> = None; // (nlml, x, iters, grad_norm)

    for seed in restart_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = initial_params(data, &layout, expr, &mut rng);
        let outcome = (|| -> Result<(f64, Vec<f64>, usize, f64, bool)> {
            let x0 = layout.pack(&init)?;
            let mut objective = |v: &[f64]| -> f64 {
                match layout.unpack(v).and_then(|p| nlml(data, expr, &p)) {
                    Ok(value) if value.is_finite() => value,
                    _ => f64::INFINITY,
                }
            };
            let mut fallible = |v: &[f64]| -> Result<f64> {
                layout.unpack(v).and_then(|p| nlml(data, expr, &p))
            };
            let out = minimize(
                &mut objective,
                |v| fd_gradient(&mut fallible, v, cfg.fd_step),
                &x0,
                &opts,
            )?;
            Ok((out.value, out.x, out.iterations, out.grad_inf_norm, out.converged))
        })();
        match outcome {
            Ok((value, x, iterations, grad_norm, converged)) => {
                if best.as_ref().map_or(true, |(b, ..)| value < *b) {
                    best = Some((value, x, iterations, grad_norm));
                }
                outcomes.push(if converged {
                    RestartOutcome::Converged {
                        nlml: value,
                        iterations,
                    }
                } else {
                    RestartOutcome::Stopped {
                        nlml: value,
                        iterations,
                    }
                });
            }
            Err(e) => outcomes.push(RestartOutcome::Failed(e.to_string())),
        }
    }

    let (best_nlml, best_x, iterations, final_grad_norm) = best.ok_or_else(|| {
        Error::Training {
            message: format!("all {} restarts failed", cfg.restarts),
            diagnostics: outcomes
                .iter()
                .map(|o| match o {
                    RestartOutcome::Failed(msg) => msg.clone(),
                    other => format!("{other:?}"),
                })
                .collect(),
        }
    })?;

    let best_params = layout.unpack(&best_x)?;
    let model = FittedModel::new(data.clone(), expr.clone(), best_params.clone())?;
    let report = FitReport {
        best_params,
        best_nlml,
        restarts: outcomes,
        iterations,
        final_grad_norm,
        wall_time: start.elapsed(),
    };
    Ok((model, report))
}

/// Randomized starting point. ARD weights draw log-uniformly from
/// `[0.1/r_d^2, 10/r_d^2]` with `r_d` the data range in dimension `d`;
/// the signal variance starts at the sample variance of the targets;
/// identity-transformed slots draw from N(0,1), log-transformed slots from
/// exp(N(0, 0.25)); fractional orders start at 1; trained noise variances
/// start at `1e-4 * var(y)`.
fn initial_params(
    data: &JointDataset,
    layout: &ParamLayout,
    expr: &OperatorExpr,
    rng: &mut ChaCha8Rng,
) -> ModelParams {
    let ranges = data.coordinate_ranges();
    let weights: Vec<f64> = ranges
        .iter()
        .map(|(lo, hi)| {
            let r = (hi - lo).max(1e-12);
            let lo_w = (0.1 / (r * r)).ln();
            let hi_w = (10.0 / (r * r)).ln();
            rng.random_range(lo_w..hi_w).exp()
        })
        .collect();
    let variance = if data.n_u() > 0 {
        sample_variance(data.y_u())
    } else {
        sample_variance(data.y_f())
    }
    .max(1e-8);

    let normal_unit: Normal<f64> = Normal::new(0.0, 1.0).unwrap();
    let normal_log: Normal<f64> = Normal::new(0.0, 0.25).unwrap();
    let mut operator = OperatorParams::new();
    for (name, transform) in layout.slots() {
        let value = if expr.order_param() == Some(name.as_str()) {
            1.0
        } else {
            match transform {
                Transform::Identity => normal_unit.sample(rng),
                Transform::Log => normal_log.sample(rng).exp(),
            }
        };
        operator.insert(name.clone(), value);
    }

    let noise_init = (1e-4 * sample_variance(&data.y_joint())).max(1e-12);
    let noise_u = match layout.noise_u {
        NoiseMode::Trained => noise_init,
        NoiseMode::Fixed(v) => v,
    };
    let noise_f = match layout.noise_f {
        NoiseMode::Trained => noise_init,
        NoiseMode::Fixed(v) => v,
    };

    ModelParams {
        kernel: SEKernelParams::new(variance, weights).expect("positive by construction"),
        operator,
        noise_u,
        noise_f,
    }
}

fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64
}
