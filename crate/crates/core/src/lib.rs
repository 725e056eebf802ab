//! Optimal threshold selection for truncated realized variance (TRV).
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`] holds the analytic conditional-moment kernels `a`, `b`, the
//!   cMSE derivative kernel `F`, the Lévy-case expectation `E[b₁]` and its
//!   small-`h` approximations, and the misclassification count.
//! * [`solvers`] turns those kernels into thresholds: the root of `F`, the
//!   root of the Lévy MSE equation, `v_n`, `w_h` and the closed-form
//!   asymptotic thresholds.
//! * [`models`] simulates seeded ground-truth paths (Merton, Heston with
//!   jumps, Gauss–Variance-Gamma, Gauss–stable).
//! * [`estimators`] implements the sixteen integrated-variance estimators and
//!   the oracle.
//! * [`harness`] runs Monte Carlo experiments and emits tables.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod models;
pub mod normal;
pub mod quadrature;
pub mod sampling;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
pub use grid::SamplingGrid;
