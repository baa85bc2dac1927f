//! Bayesian driving-mode management for a level-3 vehicle.
//!
//! The crate models a single-lane cell road with rocks and puddles, a driver
//! whose awareness is only observed through blink counts, and a controller
//! that learns the road dynamics, filters the driver state, forecasts both a
//! few intervals ahead, and decides when to issue a request to intervene
//! (RtI). A seeded harness runs trips, experiments and parameter sweeps.
//!
//! Module map:
//!
//! - [`environment`]: road generation, perception windows, traversal physics.
//! - [`driver`]: ground-truth awareness dynamics, blinks, the manual policy.
//! - [`inference`]: Dirichlet learning, obstacle/driver forecasts, Viterbi,
//!   local-level filtering and surprise probabilities.
//! - [`dipa`]: driver intervention performance assessment.
//! - [`planning`]: utilities, AUTON trajectory planning, mode assessment.
//! - [`controller`]: the per-interval loop, warnings and mode transitions.
//! - [`harness`]: configuration, trips, experiments, sweeps, traces.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dipa;
pub mod driver;
pub mod environment;
pub mod error;
pub mod harness;
pub mod inference;
pub mod planning;
pub mod rng;

pub use error::{Error, Result};

/// Version of the configuration file schema understood by this build.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;
