//! Learning the parameters of linear operators from noisy observations with
//! operator-transformed Gaussian processes.
//!
//! Given scattered observations of a function `u` and of `f = L u` for a
//! parametric linear operator `L` (differential, integro-differential, or
//! fractional), a squared-exponential Gaussian-process prior on `u` induces
//! closed-form priors on `f` whose covariances carry the operator
//! parameters. Maximizing the joint marginal likelihood recovers those
//! parameters; the conditioned process predicts `u` and `f` anywhere with
//! calibrated uncertainty.
//!
//! The crate is organized around that pipeline:
//!
//! * [`kernel`] — the squared-exponential ARD kernel and its closed-form
//!   derivative/antiderivative factors;
//! * [`operator`] — operator expressions and the transformed kernels
//!   `k_ff`, `k_uf`, `k_fu`;
//! * [`spectral`] — quadrature evaluation of fractional-order kernels;
//! * [`dsl`] — the textual operator grammar used by configs and the CLI;
//! * [`gp`] — covariance assembly, marginal likelihood, posteriors;
//! * [`train`] — multi-restart L-BFGS over transformed parameters;
//! * [`benchmarks`] — synthetic recovery problems with analytic solutions;
//! * [`gapgene`] — the Drosophila gap-gene reaction-diffusion application.

pub mod benchmarks;
pub mod dataset;
pub mod dsl;
pub mod error;
pub mod gapgene;
pub mod gp;
pub mod kernel;
pub mod operator;
mod optim;
pub mod spectral;
pub mod train;

pub use dataset::JointDataset;
pub use error::{Error, Result};
pub use gp::{FittedModel, ModelParams, Posterior, Target};
pub use kernel::{IntegralSide, SEKernelParams};
pub use operator::{AtomicTerm, Coefficient, KernelEvaluator, OperatorExpr, OperatorParams, Term};
pub use spectral::SpectralSide;
pub use train::{FitReport, NoiseMode, TrainConfig, Transform};
