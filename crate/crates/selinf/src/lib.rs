//! Post-selection inference for sparse linear regression.
//!
//! After a data-driven procedure (Lasso, least angle regression, forward
//! stepwise) picks a model, classical tests and confidence intervals for the
//! selected coefficients are biased: the selection step already favored
//! variables that look significant. This crate carries out inference
//! *conditional on the selection event*. The event `{y : same model selected}`
//! is an explicit polyhedron `{Ay <= b}` (or a union of polyhedra over sign
//! patterns), so along any contrast direction `eta` the conditional law of
//! `eta'y` is a Gaussian truncated to a computable union of intervals, and
//! exact pivots follow.
//!
//! The pieces:
//!
//! * [`linmodel`] — dense least-squares primitives backed by Householder QR:
//!   standardization, projections, pseudoinverse application.
//! * [`lasso`] — coordinate-descent Lasso, KKT diagnostics, and the
//!   sign-conditioned selection polyhedron.
//! * [`stepwise`] — forward stepwise paths, the naive RSS-drop statistic, and
//!   the stepwise selection polyhedron.
//! * [`lars`] — the LARS path with knots, entry signs, competitor bookkeeping,
//!   and exact / reduced selection polyhedra.
//! * [`polytope`] — slicing polyhedra along a contrast direction into
//!   truncation intervals, and a grid-plus-bisection line search fallback.
//! * [`truncnorm`] — numerically robust truncated-Gaussian CDF, quantile, and
//!   monotone root finding in the mean.
//! * [`inference`] — selective p-values and intervals, the significance test
//!   for the Lasso path, and the spacing test for LARS.
//! * [`cli`] — CSV ingestion, JSON reports, and the Monte Carlo calibration
//!   harness behind the `selinf` binary.
//!
//! See the `examples/` directory for one runnable walkthrough per capability.

pub mod cli;
pub mod error;
pub mod inference;
pub mod lars;
pub mod lasso;
pub mod linmodel;
pub mod polytope;
pub mod stepwise;
pub mod truncnorm;

pub use error::{Error, Result};
