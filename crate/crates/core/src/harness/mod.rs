//! Configuration, trip and experiment execution, metrics, traces and
//! rendering.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod stats;
pub mod trace;

pub use config::SimConfig;
pub use experiment::{run_experiment, run_sweep, run_trip, write_experiment, Execution, SweepPoint, SweepResult, TripRun};
pub use metrics::{ExperimentSummary, FieldSummary, TripMetrics};
pub use trace::{decode_trip_states, read_trace, render_trace, write_trace, DecodeReport};
