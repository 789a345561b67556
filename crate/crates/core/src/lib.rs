//! Stability selection for right-censored survival data under the
//! accelerated failure time (AFT) model.
//!
//! The pipeline is:
//!
//! 1. [`survival`]: load and order censored records, compute Kaplan–Meier weights.
//! 2. [`swls`]: weighted centering, which removes the intercept and turns the
//!    weighted least squares problem into an ordinary one on adjusted rows.
//! 3. [`solvers`]: lasso, ridge and elastic-net fits and regularization paths.
//! 4. [`stability`]: half-sample subsampling, selection probabilities and stable sets.
//! 5. [`simgen`], [`metrics`], [`benchmark`]: synthetic AFT data, error rates and
//!    the replicate driver used to compare methods with and without stability selection.
//!
//! With the default `parallel` feature, subsample fits and benchmark replicates run
//! on the rayon thread pool. Results are bit-identical to the sequential build.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod error;
pub mod metrics;
pub mod par;
pub mod rng;
pub mod simgen;
pub mod solvers;
pub mod stability;
pub mod survival;
pub mod swls;

pub use error::{Error, Result};
pub use solvers::{CoefficientPath, Family, FitResult, PenaltySpec, SolverOptions};
pub use stability::{SelectionRule, StabilityResult};
pub use survival::{KmWeights, OrderedSurvivalData, SurvivalRecord};
pub use swls::WeightedDesign;
