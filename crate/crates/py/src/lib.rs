//! Python bindings for the greencell toolkit.
//!
//! The extension exposes the analytic chain end to end: load a cell
//! description from JSON, solve per-state activity equilibria, build the
//! per-state ("local") and traffic-averaged ("global") power policies,
//! evaluate a policy's stationary behaviour, and cross-check everything
//! with the discrete-event simulator.
//!
//! Policies cross the boundary as plain dictionaries mapping occupancy
//! states (`"2"`, `"1,3"`, ...) to per-zone watt lists — the same shape the
//! command-line tool reads and writes, so artifacts are interchangeable.

// `pymethods` expands each fallible method into a trampoline that funnels
// its `PyErr` through an identity conversion; the lint fires on that
// generated glue, not on code written in this file.
#![allow(clippy::useless_conversion)]

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use greencell::fixed_point::{metrics_from_solution, solve_heterogeneous};
use greencell::{
    simulator, CellConfig, CellState, PowerPolicy, PowerVector, SimConfig, StateSpace,
};

/// Flattens an error and its cause chain into one `ValueError` message.
fn value_error(err: greencell::Error) -> PyErr {
    let mut text = err.to_string();
    let mut source = err.source();
    while let Some(cause) = source {
        text.push_str(": ");
        text.push_str(&cause.to_string());
        source = cause.source();
    }
    PyValueError::new_err(text)
}

/// SINR of a transmit power against a noise floor.
#[pyfunction]
fn sinr(power_w: f64, sigma2_w: f64) -> f64 {
    greencell::sinr(power_w, sigma2_w)
}

/// A configured cell: zones, traffic, power bounds, and the rate curve.
///
/// Constructed from the same JSON documents the command-line tool accepts,
/// either inline (`Cell(text)`) or from disk (`Cell.load(path)`; rate-table
/// paths resolve relative to the file).
#[pyclass]
struct Cell {
    config: CellConfig,
    space: StateSpace,
}

impl Cell {
    fn from_config(config: CellConfig) -> PyResult<Self> {
        let space = config.state_space().map_err(value_error)?;
        Ok(Self { config, space })
    }

    fn parse_state(&self, state: &str) -> PyResult<usize> {
        let state = CellState::from_str(state).map_err(value_error)?;
        self.space.require_index(&state).map_err(value_error)
    }

    fn policy_from_map(&self, map: &BTreeMap<String, Vec<f64>>) -> PyResult<PowerPolicy> {
        PowerPolicy::from_map(&self.space, map).map_err(value_error)
    }
}

// The `pymethods` expansion funnels every `PyResult` return through one more
// identity conversion; the lint fires on that generated glue, not our code.
#[allow(clippy::useless_conversion)]
#[pymethods]
impl Cell {
    #[new]
    fn new(json_text: &str) -> PyResult<Self> {
        let config = CellConfig::from_json_str(json_text, None).map_err(value_error)?;
        Self::from_config(config)
    }

    /// Loads a cell description from a JSON file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let config = CellConfig::load(&path).map_err(value_error)?;
        Self::from_config(config)
    }

    /// Number of zones.
    fn zones(&self) -> usize {
        self.space.zones()
    }

    /// Admission cap on concurrent flows.
    fn n_max(&self) -> u32 {
        self.space.n_max()
    }

    /// Every admissible occupancy state, as `"N1,N2,..."` strings, in the
    /// enumeration order used by all vector-valued results.
    fn states(&self) -> Vec<String> {
        self.space.states().iter().map(|s| s.to_string()).collect()
    }

    /// Full-channel throughput (bits/s) one user in `zone` would see under
    /// `power_w` watts, i.e. the rate curve evaluated at the zone's SINR.
    fn rate_bps(&self, zone: usize, power_w: f64) -> PyResult<f64> {
        let zone_cfg = self
            .config
            .zones
            .get(zone)
            .ok_or_else(|| PyValueError::new_err(format!("no zone {zone}")))?;
        Ok(self
            .config
            .rate_curve
            .throughput(greencell::sinr(power_w, zone_cfg.sigma2_w)))
    }

    /// Solves the activity equilibrium of one occupancy state under the
    /// given per-zone powers. Returns a dict with the per-zone activity
    /// (`phi`), active-user rates, and the state's throughput, consumed
    /// power, and energy efficiency.
    fn solve_state<'py>(
        &self,
        py: Python<'py>,
        state: &str,
        powers: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let idx = self.parse_state(state)?;
        let state = self.space.state(idx);
        let powers = PowerVector(powers);
        powers
            .validate_bounds(self.config.p_min_w, self.config.p_max_w)
            .map_err(value_error)?;
        let solution = solve_heterogeneous(
            state,
            &powers,
            &self.config.zones,
            &self.config.rate_curve,
            &self.config.traffic,
        )
        .map_err(value_error)?;
        let metrics =
            metrics_from_solution(state.counts(), &powers, &solution, self.config.fixed_cost_w);
        let out = PyDict::new_bound(py);
        out.set_item("state", state.to_string())?;
        out.set_item("phi", solution.phi)?;
        out.set_item("r_active_bps", solution.r_active)?;
        out.set_item("iterations", solution.iterations)?;
        out.set_item("throughput_bps", metrics.throughput_bps)?;
        out.set_item("power_w", metrics.power_w)?;
        out.set_item("eta_bits_per_joule", metrics.eta_bits_per_joule)?;
        Ok(out)
    }

    /// The per-state-optimal ("local") policy: each state's powers maximize
    /// that state's own energy efficiency.
    fn local_policy(&self) -> PyResult<BTreeMap<String, Vec<f64>>> {
        let policy = self.config.local_policy(&self.space).map_err(value_error)?;
        Ok(policy.to_map(&self.space))
    }

    /// Maximizes traffic-averaged efficiency under the blocking constraint.
    /// Returns a dict with the policy, its objective, blocking probability,
    /// feasibility, and the ascent trace.
    fn optimize<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let result = self.config.optimize(&self.space).map_err(value_error)?;
        let out = PyDict::new_bound(py);
        out.set_item("policy", result.policy.to_map(&self.space))?;
        out.set_item("objective_bits_per_joule", result.objective_bits_per_joule)?;
        out.set_item("blocking_probability", result.blocking_probability)?;
        out.set_item("feasible", result.feasible)?;
        out.set_item("trace", result.trace)?;
        Ok(out)
    }

    /// Evaluates a policy analytically: stationary distribution (aligned
    /// with `states()`), blocking, traffic-averaged efficiency, and the
    /// stationary means of power and throughput.
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        policy: BTreeMap<String, Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let policy = self.policy_from_map(&policy)?;
        let mut evaluator = self.config.evaluator(&self.space);
        evaluator.load_policy(&policy).map_err(value_error)?;
        let eval = evaluator.evaluate().map_err(value_error)?;
        let out = PyDict::new_bound(py);
        out.set_item("pi", eval.distribution.pi.clone())?;
        out.set_item("blocking_probability", eval.distribution.blocking_probability)?;
        out.set_item(
            "feasible",
            eval.distribution.qos_satisfied(self.config.flow.epsilon),
        )?;
        out.set_item("eta_bits_per_joule", eval.eta_bits_per_joule)?;
        out.set_item("mean_power_w", eval.mean_power_w)?;
        out.set_item("mean_throughput_bps", eval.mean_throughput_bps)?;
        Ok(out)
    }

    /// Runs the discrete-event simulator under a policy and returns the
    /// empirical estimates with their standard errors and event counts.
    /// The same seed always reproduces the same result.
    #[pyo3(signature = (policy, horizon_s, seed, warmup_s = 0.0, replications = 1))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        policy: BTreeMap<String, Vec<f64>>,
        horizon_s: f64,
        seed: u64,
        warmup_s: f64,
        replications: u32,
    ) -> PyResult<Bound<'py, PyDict>> {
        let policy = self.policy_from_map(&policy)?;
        let sim = SimConfig {
            horizon_s,
            warmup_s,
            seed,
            replications,
        };
        let result = simulator::simulate(
            &policy,
            &self.space,
            &self.config.zones,
            &self.config.rate_curve,
            &self.config.traffic,
            &self.config.flow,
            self.config.fixed_cost_w,
            &sim,
        )
        .map_err(value_error)?;
        let out = PyDict::new_bound(py);
        out.set_item("empirical_pi", result.empirical_pi)?;
        out.set_item("pi_se", result.pi_se)?;
        out.set_item("empirical_blocking", result.empirical_blocking)?;
        out.set_item("blocking_se", result.blocking_se)?;
        out.set_item("empirical_eta", result.empirical_eta)?;
        out.set_item("eta_se", result.eta_se)?;
        out.set_item("offered", result.offered)?;
        out.set_item("accepted", result.accepted)?;
        out.set_item("blocked", result.blocked)?;
        out.set_item("departures", result.departures)?;
        out.set_item("residual_users", result.residual_users)?;
        out.set_item("events", result.events)?;
        Ok(out)
    }
}

#[pymodule]
fn greencell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sinr, m)?)?;
    m.add_class::<Cell>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
