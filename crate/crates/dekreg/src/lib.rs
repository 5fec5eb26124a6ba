//! Kernel regression estimators assisted by first-order differential
//! equations, for data with sparse designs.
//!
//! The estimators here weight a local least-squares fit with a kernel, as in
//! classical local polynomial regression, but replace the free polynomial
//! coefficients with the derivatives implied by a growth law (`g' = λg` or
//! `g' = λg^α`), leaving a single local parameter to estimate. That keeps
//! the sparse-design robustness of local constant regression while cutting
//! its bias.
//!
//! The crate also ships the asymptotic bias/variance calculators for these
//! estimators, a Monte Carlo comparison harness, and an embedded tumour
//! growth dataset with its analysis pipelines; the `dekreg` binary exposes
//! all of it behind a file-based CLI.

// `!(h > 0.0)` style guards reject NaN along with nonpositive values; the
// partial_cmp rewrite clippy suggests would silently admit NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bandwidth;
pub mod cli;
pub mod error;
pub mod golden;
pub mod growth;
pub mod io;
pub mod kernel;
pub mod localfit;
pub mod quad;
pub mod simlab;
pub mod tumor;

pub use error::{Error, Result};
pub use kernel::{kernel_moments, kh_weight, Kernel, KernelConstants, KernelMoments};
pub use localfit::{
    de1k_fit, fit_curve, local_poly_fit, Dataset, FitCurve, FitMethod, TaylorWeight,
};
