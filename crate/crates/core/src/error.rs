//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants carry
//! enough context (zone index, state text, offending value) that a caller can
//! report the failure without re-deriving where it came from.

use thiserror::Error;

/// Errors raised by model construction, solvers, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A rate curve could not be constructed or parsed.
    #[error("rate curve: {0}")]
    RateCurve(String),

    /// A configuration value violates a documented invariant.
    #[error("config: {0}")]
    Config(String),

    /// File access failed.
    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The admissible state space is larger than the resource ceiling.
    #[error("state space has {count} states, above the ceiling of {ceiling}")]
    StateSpaceTooLarge { count: u128, ceiling: usize },

    /// A state string could not be parsed or lies outside the space.
    #[error("state {state}: {reason}")]
    BadState { state: String, reason: String },

    /// Per-flow quantities are undefined in the empty state.
    #[error("empty state: per-user quantities are undefined with no users")]
    EmptyState,

    /// A zone has users but no way to serve them (zero power or zero rate).
    #[error("zone {zone} has users but a zero service rate; its queue is starved")]
    StarvedZone { zone: usize },

    /// The activity fixed point did not converge.
    #[error("activity fixed point stalled at residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: u32 },

    /// A power policy does not cover a required state.
    #[error("power policy is missing state {state}")]
    MissingPolicyState { state: String },

    /// A power value falls outside the configured bounds.
    #[error("power {power_w} W for zone {zone} is outside [{min_w}, {max_w}] W")]
    PowerOutOfBounds {
        zone: usize,
        power_w: f64,
        min_w: f64,
        max_w: f64,
    },

    /// A per-state evaluation failed while processing a larger structure.
    #[error("state {state}: {source}")]
    StateEvaluation {
        state: String,
        #[source]
        source: Box<Error>,
    },

    /// The stationary balance equations could not be solved.
    #[error("stationary distribution: {0}")]
    Stationary(String),
}

impl Error {
    /// Wraps an error with the state it occurred in.
    pub fn in_state(self, state: impl std::fmt::Display) -> Self {
        Error::StateEvaluation {
            state: state.to_string(),
            source: Box::new(self),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
