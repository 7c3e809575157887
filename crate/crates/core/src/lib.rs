//! Hybrid simulation of tip-cell angiogenesis.
//!
//! Two coupled halves share one model: a stochastic system of tip cells
//! (Langevin motion, branching from tips and vessels, anastomosis) driving
//! and driven by a diffusing growth-factor field, and the deterministic
//! mean-field limit of that system (a kinetic phase-space density coupled to
//! the same field equation). On top of both sits an analysis toolbox that
//! turns the model's structural guarantees (tip-count domination, Wald's
//! identity, maximum-principle bounds, mass identities, non-extinction,
//! empirical-measure convergence) into runnable numerical checks.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod error;
pub mod field;
pub mod geom;
pub mod grid;
pub mod kernels;
pub mod manifest;
pub mod meanfield;
pub mod network;
pub mod offspring;
pub mod output;
pub mod params;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tumor;

pub use error::{AngioError, Result};
