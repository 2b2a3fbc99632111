//! Zeroth-order proximal optimization with exact function-query accounting.
//!
//! The library solves finite-sum composite problems
//! `F(x) = (1/n) sum_i f_i(x) + r(x)` where only component *values* of the
//! smooth part are observable. It provides:
//!
//! * random (two-point) and coordinated ZO gradient estimators with fixed,
//!   auditable query costs ([`estimators`]);
//! * variance-reduced ZO proximal solvers — ZOR-ProxSVRG, ZOR-ProxSAGA — plus
//!   an RSPGF-style baseline and a coordinated-estimator SVRG used as the
//!   switch-protocol fallback ([`solvers`]);
//! * stagewise reduction frameworks for convex and weakly convex problems
//!   that wrap any inner solver satisfying an objective-decrease contract
//!   ([`reductions`]);
//! * LIBSVM ingestion, synthetic data, and the convex/non-convex logistic
//!   fixtures with white-box gradients for diagnostics ([`problems`]);
//! * a configuration-driven benchmark runner that writes CSV traces of
//!   objective value against cumulative function queries ([`bench`]).
//!
//! Every component evaluation passes through a [`model::QueryLedger`];
//! solver epochs assert their closed-form query cost, so the FQC axis of
//! any produced trace is exact, not estimated.

pub mod bench;
pub mod error;
pub mod estimators;
pub mod model;
pub mod problems;
pub mod prox;
pub mod reductions;
pub mod reference;
pub mod solvers;
pub(crate) mod vecops;

pub use error::{Error, Result};
pub use model::{BlackBoxProblem, ConvexityClass, ProblemMeta, QueryLedger};
pub use prox::{grad_mapping, prox_step, Regularizer};
pub use solvers::{RunTrace, SolverConfig};
