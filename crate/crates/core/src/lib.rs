//! Flow-level energy-efficiency analysis for a shared downlink cell.
//!
//! A base station serves file transfers in concentric zones, each zone with
//! its own radio conditions and Poisson flow arrivals. Transmission power
//! per user is a policy decision; spending more watts finishes flows faster
//! but burns more energy, and a load-independent cost is paid whenever the
//! cell is on. This crate models the resulting trade-off end to end:
//!
//! * [`rate_model`] — SINR and the power-to-throughput mapping;
//! * [`state_space`] — enumeration of admissible occupancy states;
//! * [`fixed_point`] — per-state queue-activity equilibrium and energy
//!   efficiency of a state;
//! * [`flow_level`] — the occupancy Markov process, its stationary law,
//!   blocking, and traffic-averaged efficiency of a policy;
//! * [`optimizer`] — per-state ("local") and traffic-averaged ("global")
//!   power-policy search under a blocking constraint;
//! * [`simulator`] — discrete-event cross-check of the analytic chain;
//! * [`config`] — JSON ingestion and the CSV sweep runner behind the CLI.

pub mod config;
pub mod error;
pub mod fixed_point;
pub mod flow_level;
pub mod optimizer;
pub mod rate_model;
pub mod simulator;
pub mod state_space;

pub use config::{
    run_sweep, write_sweep_csv, CellConfig, PolicyOutcome, SweepMode, SweepRow, SweepSpec,
    SweepVariable, SWEEP_CSV_HEADER,
};
pub use error::{Error, Result};
pub use fixed_point::{FixedPointSolution, PowerVector, StateMetrics, TrafficParams};
pub use flow_level::{
    FlowParams, PolicyEvaluation, PolicyEvaluator, PowerPolicy, StationaryDistribution,
};
pub use optimizer::{OptimizationResult, OptimizerConfig};
pub use rate_model::{sinr, RateCurve, ZoneConfig};
pub use simulator::{SimConfig, SimResult, TraceEvent};
pub use state_space::{CellState, StateSpace};
