//! Two-stage targeted minimum loss-based estimation (TMLE) of counterfactual
//! strata effects in cluster-randomized trials, where measurement of the
//! target population mediates the effect of interest.
//!
//! Stage 1 estimates a cluster-level endpoint within each cluster — the
//! outcome probability among the underlying target population, handling
//! differential measurement with a targeted, doubly robust ratio estimator.
//! Stage 2 contrasts those endpoints across arms, with Adaptive
//! Pre-specification selecting the covariate adjustment that maximizes
//! empirical efficiency, and Student-t influence-curve inference.
//!
//! The crate also ships the full simulation study: a configurable
//! data-generating process with counterfactuals, ground-truth computation,
//! a Monte Carlo replicate harness, and a small CLI (`tstmle`) with `truth`,
//! `simulate`, `analyze` and `table1` subcommands. The `examples/` directory
//! demonstrates each major capability end to end.

pub mod data;
pub mod error;
pub mod harness;
pub mod learners;
pub mod seeds;
pub mod simgen;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
