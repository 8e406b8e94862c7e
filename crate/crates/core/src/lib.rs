//! Contextual-bandit experimental-design laboratory.
//!
//! The pieces, bottom up:
//!
//! - [`types`]: action measures, finite function classes, benchmark
//!   distribution sets, design certificates.
//! - [`coverage`]: the regularized extrapolation functional between a
//!   covering measure and a target distribution.
//! - [`solver`]: the exploitative F-design coordinate descent, producing
//!   certified exploration/exploitation distributions.
//! - [`complexity`]: brute-force and analytic evaluators for the structural
//!   complexity measures (SEC, DOEC, DEC, Eluder dimension) and the
//!   cheating-code instance family.
//! - [`oracles`]: offline ERM and follow-the-leader regression.
//! - [`env`]: simulators with corruption, context-distribution shift, and
//!   misspecification variants.
//! - [`engine`]: epoch-based and per-round bandit algorithms, baselines,
//!   schedules, and run ledgers.

pub mod complexity;
pub mod coverage;
pub mod engine;
pub mod env;
pub mod error;
pub mod instances;
pub mod oracles;
pub mod rng;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ActionMeasure, BenchmarkSet, ContextualFunctionClass, DesignCertificate, FunctionClassSlice,
    NORM_TOL,
};
