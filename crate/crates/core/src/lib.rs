//! Kernel density estimation for dyadic data: outcomes `W_ij` indexed by
//! unordered pairs of `n` nodes, as in trade volumes between country pairs.
//!
//! Dyadic samples are not i.i.d.: every pair of edges sharing a node is
//! dependent, so the estimator's variance has a node-level component that can
//! vanish (degenerate designs) at some or all evaluation points. The
//! inference code here builds uniform confidence bands that stay valid
//! whether that component vanishes nowhere, somewhere, or everywhere,
//! without requiring the user to know which case applies.
//!
//! The pieces, bottom to top:
//!
//! * [`data`]: edge-list model with explicit missing edges, network summaries;
//! * [`kernels`]: boundary-corrected kernels of a chosen order on a compact support;
//! * [`estimator`]: the pair-averaged density estimate and its covariate-weighted variant;
//! * [`bandwidth`]: rule-of-thumb and asymptotic-IMSE bandwidth selectors;
//! * [`covariance`]: covariance function estimate on a grid and its constrained
//!   positive-semidefinite repair;
//! * [`inference`]: Gaussian sup-statistic quantiles, uniform bands, the
//!   bias-robust band pipeline, and a two-sample equality test;
//! * [`counterfactual`]: density reweighting between two populations with
//!   node-level discrete covariates;
//! * [`simulation`]: a three-point latent-factor data generator with known
//!   truth, decomposition diagnostics, and a Monte Carlo study harness.
//!
//! Everything that consumes randomness takes an explicit `seed` and produces
//! bit-identical output for a fixed seed regardless of thread count. The
//! `parallel` feature (on by default) runs the pair sums, resampling draws and
//! Monte Carlo replications on a rayon pool; disabling it yields a dependency-light
//! sequential build with identical results.

pub mod bandwidth;
pub mod counterfactual;
pub mod covariance;
pub mod data;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod kernels;
pub(crate) mod numeric;
pub(crate) mod par;
pub mod simulation;

pub use data::{DyadicDataset, NetworkSummary};
pub use error::{Error, Result};
pub use estimator::{DensityEstimate, EvaluationGrid};
pub use inference::{RbcConfig, TestStat, TwoSampleResult, UniformBand};
pub use kernels::{KernelFamily, KernelSpec};
pub use simulation::{McConfig, McReport, PiParams};
