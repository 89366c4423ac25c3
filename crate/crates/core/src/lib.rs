//! One-step estimation with scaled proximal methods.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: parameter vectors and symmetric positive definite scalings.
//! - [`objective`]: smooth and nonsmooth terms and the composite objective `g + h`.
//! - [`prox`]: closed-form and generic scaled proximal operators and the scaled
//!   Moreau envelope with its gradient `C (x - prox(x))`.
//! - [`solvers`]: one-step estimators (scaled proximal gradient, scaled proximal
//!   descent, Newton), full proximal-gradient / proximal-Newton runs with the
//!   `c / sqrt(n)` stopping rule, and the stopping-inequality audit.
//! - [`models`]: Cauchy location, bivariate normal mean and low-rank logistic models.
//! - [`experiments`]: Monte Carlo harnesses built on the above.
//! - [`cli`]: edge-list ingestion, report emission and the command dispatcher used
//!   by the `onestep` binary.
//!
//! Runnable walkthroughs for each capability live in this crate's `examples/`.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod extreal;
pub mod linalg;
pub mod models;
pub mod objective;
pub mod prox;
pub mod random;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{spd_solve, weighted_norm, Curvature, ParamPoint, ScalingMatrix};
pub use objective::{
    convexity_spot_check, CompositeObjective, ConvexityReport, NonsmoothTerm, QuadraticTerm,
    RegularityConstants, SmoothTerm,
};
pub use prox::{InnerSolveConfig, ProxResult, StepRule};
