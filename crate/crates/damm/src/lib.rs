//! Dynamic adaptive mixture models.
//!
//! A finite mixture whose component parameters and mixing weights evolve
//! through time, driven by the score of the conditional log-density. The
//! crate provides the building blocks in layers:
//!
//! - [`density`]: log-densities of the supported component families and
//!   mixtures of them, plus the scalar special functions they need.
//! - [`mapping`]: link functions that keep unconstrained states inside their
//!   admissible regions (positivity, simplex, correlation matrices), with
//!   analytic Jacobians.
//! - [`model`]: model specification, state layout, and update coefficients.
//! - [`filter`]: conditional scores, the score-driven update, the filtering
//!   pass, and implied moments.
//! - [`simulate`]: model simulators plus the synthetic processes used by the
//!   Monte Carlo studies.
//! - [`estimate`]: static-mixture EM, maximum-likelihood fitting of the
//!   dynamic model, and the two-step copula fit.
//! - [`evaluate`]: accuracy metrics, density divergences, calibration tests,
//!   and reference baselines.
//! - [`bench`]: replication studies that tie the layers together.
//! - [`config`] / [`io`] / [`cli`]: run configuration, CSV/JSON persistence,
//!   and the command entry points used by the thin binary.
//!
//! Everything is deterministic given a seed: simulators take an explicit RNG,
//! estimation derives its restart jitter from a configured seed, and the
//! command layer writes reproducible bytes.

pub mod bench;
pub mod cli;
pub mod config;
pub mod density;
pub mod error;
pub mod estimate;
pub mod evaluate;
pub mod filter;
pub mod io;
pub mod mapping;
pub mod model;
pub mod simulate;
pub mod special;

pub use error::{DammError, Result};
