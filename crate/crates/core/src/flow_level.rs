//! Stationary distribution, blocking, and global energy efficiency.
//!
//! Occupancy evolves as a continuous-time Markov chain: zone `c` admits new
//! flows at rate `lambda_c` (blocked when the cell already holds `n_max`
//! users), and each resident flow departs once its file is streamed. Because
//! a user in zone `c` receives `phi_c * R_a_c` bits/s on time average (see
//! [`crate::fixed_point`]), zone `c`'s departure rate in state `s` is
//! `N_c * phi_c * R_a_c / S` for mean file size `S`.
//!
//! [`stationary_distribution`] solves the global-balance equations of that
//! chain exactly (a small linear system). [`product_form_distribution`]
//! evaluates a closed-form product expression over per-zone occupancy
//! ladders; the two agree for single-zone systems, where the chain is a
//! birth–death process and the product telescopes exactly, but the closed
//! form is an approximation when several zones couple through contention.
//! The balance solve is therefore the primary route and the product form a
//! cross-check.
//!
//! From the distribution follow the blocking probability (the stationary
//! mass on full states — Poisson arrivals see time averages), the blocked
//! arrival rate, and the global efficiency `eta_hat = sum_s pi(s) * eta_s`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{
    metrics_from_solution, solve_heterogeneous, FixedPointSolution, PowerVector, StateMetrics,
    TrafficParams,
};
use crate::rate_model::{RateCurve, ZoneConfig};
use crate::state_space::{CellState, StateSpace};

/// Flow-level demand parameters: file sizes and the blocking target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Mean file size per flow, bits.
    pub file_bits: f64,
    /// Maximum tolerable blocking probability.
    pub epsilon: f64,
}

impl FlowParams {
    /// Offered traffic of one zone, bits/s: file size times arrival rate.
    pub fn offered_traffic_bps(&self, lambda_per_s: f64) -> f64 {
        self.file_bits * lambda_per_s
    }
}

/// Per-state transmit powers for every nonempty occupancy state.
///
/// Stored aligned with a [`StateSpace`] enumeration; the empty state needs no
/// powers (nobody is listening) and optional entries let policies be built
/// incrementally.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPolicy {
    powers: Vec<Option<PowerVector>>,
}

impl PowerPolicy {
    /// Policy with no assignments yet.
    pub fn empty(space: &StateSpace) -> Self {
        Self {
            powers: vec![None; space.len()],
        }
    }

    /// Same power vector in every state.
    pub fn constant(space: &StateSpace, powers: PowerVector) -> Result<Self> {
        if powers.len() != space.zones() {
            return Err(Error::Config(format!(
                "constant policy has {} powers for {} zones",
                powers.len(),
                space.zones()
            )));
        }
        Ok(Self {
            powers: vec![Some(powers); space.len()],
        })
    }

    /// Assigns the powers used in one state.
    pub fn set(&mut self, state_index: usize, powers: PowerVector) {
        self.powers[state_index] = Some(powers);
    }

    /// Powers assigned to one state, if any.
    pub fn get(&self, state_index: usize) -> Option<&PowerVector> {
        self.powers[state_index].as_ref()
    }

    /// Powers for a state that must be covered, naming the state otherwise.
    pub fn require(&self, space: &StateSpace, state_index: usize) -> Result<&PowerVector> {
        self.powers[state_index]
            .as_ref()
            .ok_or_else(|| Error::MissingPolicyState {
                state: space.state(state_index).to_string(),
            })
    }

    /// Checks that every nonempty state is covered and within bounds.
    pub fn validate(&self, space: &StateSpace, min_w: f64, max_w: f64) -> Result<()> {
        for idx in 0..space.len() {
            if space.state(idx).is_empty() {
                continue;
            }
            let powers = self.require(space, idx)?;
            if powers.len() != space.zones() {
                return Err(Error::Config(format!(
                    "policy for state {} has {} powers for {} zones",
                    space.state(idx),
                    powers.len(),
                    space.zones()
                )));
            }
            powers
                .validate_bounds(min_w, max_w)
                .map_err(|e| e.in_state(space.state(idx)))?;
        }
        Ok(())
    }

    /// Iterates over the assigned power vectors.
    pub fn assigned(&self) -> impl Iterator<Item = &PowerVector> {
        self.powers.iter().filter_map(|p| p.as_ref())
    }

    /// Serializable view: state text (`"N1,N2,..."`) to power list.
    pub fn to_map(&self, space: &StateSpace) -> BTreeMap<String, Vec<f64>> {
        let mut map = BTreeMap::new();
        for (idx, entry) in self.powers.iter().enumerate() {
            if let Some(powers) = entry {
                if !space.state(idx).is_empty() {
                    map.insert(space.state(idx).to_string(), powers.as_slice().to_vec());
                }
            }
        }
        map
    }

    /// Rebuilds a policy from the serializable view.
    pub fn from_map(space: &StateSpace, map: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut policy = Self::empty(space);
        for (text, powers) in map {
            let state: CellState = text.parse()?;
            let idx = space.require_index(&state)?;
            policy.set(idx, PowerVector(powers.clone()));
        }
        Ok(policy)
    }
}

/// Stationary law of the occupancy chain plus the blocking metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    /// Probability per state, aligned with the state-space enumeration.
    pub pi: Vec<f64>,
    /// Normalizing constant of the weight representation with the empty
    /// state's weight fixed at 1 (so `pi(empty) = 1 / gamma`).
    pub gamma: f64,
    /// Fraction of arrivals blocked: stationary mass on full states.
    pub blocking_probability: f64,
    /// Blocked arrivals per second: total arrival rate times the blocking
    /// probability.
    pub blocked_arrival_rate_per_s: f64,
}

impl StationaryDistribution {
    /// Blocking metrics as a `(probability, arrivals/second)` pair.
    pub fn blocking(&self) -> (f64, f64) {
        (self.blocking_probability, self.blocked_arrival_rate_per_s)
    }

    /// Whether the blocking target is met.
    pub fn qos_satisfied(&self, epsilon: f64) -> bool {
        self.blocking_probability <= epsilon
    }
}

/// Total-variation distance between two distributions on the same space.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

/// Solved fixed point and metrics of one state under its assigned powers.
#[derive(Debug, Clone)]
pub struct StateEval {
    /// Powers the state was solved under.
    pub powers: PowerVector,
    /// The activity fixed point.
    pub solution: FixedPointSolution,
    /// Derived throughput, power, and efficiency.
    pub metrics: StateMetrics,
}

/// Incremental policy evaluation over one state space.
///
/// Holds the per-state fixed points so that re-optimizing a single state's
/// powers only re-solves that state, while distribution-level quantities are
/// recomputed on demand.
pub struct PolicyEvaluator<'a> {
    space: &'a StateSpace,
    zones: &'a [ZoneConfig],
    curve: &'a RateCurve,
    traffic: &'a TrafficParams,
    flow: &'a FlowParams,
    fixed_cost_w: f64,
    evals: Vec<Option<StateEval>>,
}

/// Distribution-level summary of a fully-assigned policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    /// The stationary law and blocking metrics.
    pub distribution: StationaryDistribution,
    /// Global efficiency `sum_s pi(s) * eta_s`, bits per joule.
    pub eta_bits_per_joule: f64,
    /// Stationary mean consumed power, watts.
    pub mean_power_w: f64,
    /// Stationary mean cell throughput, bits/s.
    pub mean_throughput_bps: f64,
}

impl<'a> PolicyEvaluator<'a> {
    /// Evaluator over `space` with the given physical parameters.
    pub fn new(
        space: &'a StateSpace,
        zones: &'a [ZoneConfig],
        curve: &'a RateCurve,
        traffic: &'a TrafficParams,
        flow: &'a FlowParams,
        fixed_cost_w: f64,
    ) -> Self {
        Self {
            space,
            zones,
            curve,
            traffic,
            flow,
            fixed_cost_w,
            evals: vec![None; space.len()],
        }
    }

    /// The state space being evaluated.
    pub fn space(&self) -> &StateSpace {
        self.space
    }

    /// Zone parameters.
    pub fn zones(&self) -> &[ZoneConfig] {
        self.zones
    }

    /// Flow parameters.
    pub fn flow(&self) -> &FlowParams {
        self.flow
    }

    /// Solves every nonempty state under `policy`.
    pub fn load_policy(&mut self, policy: &PowerPolicy) -> Result<()> {
        for idx in 0..self.space.len() {
            if self.space.state(idx).is_empty() {
                continue;
            }
            let powers = policy.require(self.space, idx)?.clone();
            self.set_state_powers(idx, powers)?;
        }
        Ok(())
    }

    /// Re-solves one state under new powers.
    pub fn set_state_powers(&mut self, state_index: usize, powers: PowerVector) -> Result<()> {
        let state = self.space.state(state_index);
        let solution = solve_heterogeneous(state, &powers, self.zones, self.curve, self.traffic)
            .map_err(|e| e.in_state(state))?;
        let metrics =
            metrics_from_solution(state.counts(), &powers, &solution, self.fixed_cost_w);
        self.evals[state_index] = Some(StateEval {
            powers,
            solution,
            metrics,
        });
        Ok(())
    }

    /// Solved data for one state, if assigned.
    pub fn state_eval(&self, state_index: usize) -> Option<&StateEval> {
        self.evals[state_index].as_ref()
    }

    /// Snapshot of the currently assigned powers as a policy.
    pub fn policy(&self) -> PowerPolicy {
        let mut policy = PowerPolicy::empty(self.space);
        for (idx, eval) in self.evals.iter().enumerate() {
            if let Some(eval) = eval {
                policy.set(idx, eval.powers.clone());
            }
        }
        policy
    }

    /// Departure rate of `zone` in the given state: occupants times the
    /// per-user delivered rate, divided by the mean file size. Flows/second.
    pub fn departure_rate(&self, state_index: usize, zone: usize) -> Result<f64> {
        let state = self.space.state(state_index);
        let n = state.counts()[zone];
        if n == 0 {
            return Ok(0.0);
        }
        let eval = self.evals[state_index]
            .as_ref()
            .ok_or_else(|| Error::MissingPolicyState {
                state: state.to_string(),
            })?;
        Ok(n as f64 * eval.solution.user_rate_bps(zone) / self.flow.file_bits)
    }

    /// States reachable from empty: zones that never see arrivals stay empty.
    fn support(&self) -> Vec<usize> {
        (0..self.space.len())
            .filter(|&idx| {
                self.space
                    .state(idx)
                    .counts()
                    .iter()
                    .zip(self.zones)
                    .all(|(&n, z)| n == 0 || z.lambda_per_s > 0.0)
            })
            .collect()
    }

    /// Solves the global-balance equations of the occupancy chain.
    ///
    /// The returned distribution covers the full enumeration, with zero mass
    /// on states unreachable from empty.
    pub fn stationary_distribution(&self) -> Result<StationaryDistribution> {
        let total_lambda: f64 = self.zones.iter().map(|z| z.lambda_per_s).sum();
        let empty_idx = self
            .space
            .index_of(&CellState::new(vec![0; self.space.zones()]))
            .expect("enumeration always contains the empty state");
        let mut pi = vec![0.0; self.space.len()];

        if total_lambda == 0.0 {
            pi[empty_idx] = 1.0;
            return Ok(StationaryDistribution {
                pi,
                gamma: 1.0,
                blocking_probability: 0.0,
                blocked_arrival_rate_per_s: 0.0,
            });
        }

        let support = self.support();
        let n = support.len();
        let mut col_of = vec![usize::MAX; self.space.len()];
        for (col, &idx) in support.iter().enumerate() {
            col_of[idx] = col;
        }

        // Balance matrix A = Q^T with one equation replaced by normalization:
        // row `r` of Q^T reads sum_i pi(i) * q(i -> r) - pi(r) * out(r) = 0.
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (col, &idx) in support.iter().enumerate() {
            let transitions = self.space.transitions(idx);
            let mut out_rate = 0.0;
            for &(zone, to) in &transitions.arrivals {
                let rate = self.zones[zone].lambda_per_s;
                if rate > 0.0 {
                    a[(col_of[to], col)] += rate;
                    out_rate += rate;
                }
            }
            for &(zone, to) in &transitions.departures {
                let rate = self.departure_rate(idx, zone)?;
                if rate > 0.0 {
                    a[(col_of[to], col)] += rate;
                    out_rate += rate;
                }
            }
            a[(col, col)] -= out_rate;
        }
        for col in 0..n {
            a[(n - 1, col)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;

        let solution = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Stationary("balance equations are singular".into()))?;

        let mut sum = 0.0;
        for (col, &idx) in support.iter().enumerate() {
            // LU round-off can leave tiny negative mass; clamp before
            // renormalizing.
            pi[idx] = solution[col].max(0.0);
            sum += pi[idx];
        }
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::Stationary(format!(
                "balance solution is degenerate (mass {sum})"
            )));
        }
        for p in &mut pi {
            *p /= sum;
        }
        if pi[empty_idx] <= 0.0 {
            return Err(Error::Stationary(
                "empty state carries no stationary mass".into(),
            ));
        }
        let gamma = 1.0 / pi[empty_idx];
        Ok(self.finish_distribution(pi, gamma, total_lambda))
    }

    /// Evaluates the closed-form product expression for the stationary law.
    ///
    /// The weight of a state multiplies, over zones, the offered traffic
    /// raised to the occupancy divided by a ladder of delivered rates, where
    /// rung `j` of zone `c`'s ladder is read in the state with coordinate `c`
    /// replaced by `j` and all others unchanged; a multinomial coefficient
    /// counts arrival orderings. Exact for single-zone systems (the ladder
    /// telescopes the birth–death balance); for coupled zones it is an
    /// approximation — prefer [`Self::stationary_distribution`].
    pub fn product_form_distribution(&self) -> Result<StationaryDistribution> {
        let total_lambda: f64 = self.zones.iter().map(|z| z.lambda_per_s).sum();
        let empty_idx = self
            .space
            .index_of(&CellState::new(vec![0; self.space.zones()]))
            .expect("enumeration always contains the empty state");
        let mut pi = vec![0.0; self.space.len()];
        if total_lambda == 0.0 {
            pi[empty_idx] = 1.0;
            return Ok(StationaryDistribution {
                pi,
                gamma: 1.0,
                blocking_probability: 0.0,
                blocked_arrival_rate_per_s: 0.0,
            });
        }

        let support = self.support();
        let mut log_w = vec![f64::NEG_INFINITY; self.space.len()];
        for &idx in &support {
            log_w[idx] = self.product_form_log_weight(idx)?;
        }
        let max_log = log_w
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &idx in &support {
            pi[idx] = (log_w[idx] - max_log).exp();
            sum += pi[idx];
        }
        for p in &mut pi {
            *p /= sum;
        }
        // w(empty) = 1 by construction, so gamma is the shifted weight sum.
        let gamma = (max_log + sum.ln()).exp();
        Ok(self.finish_distribution(pi, gamma, total_lambda))
    }

    /// Log weight of one state in the product expression.
    fn product_form_log_weight(&self, state_index: usize) -> Result<f64> {
        let counts = self.space.state(state_index).counts().to_vec();
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return Ok(0.0);
        }
        // ln multinomial(N; N_1..N_M) = ln N! - sum_c ln N_c!.
        let ln_fact = |n: u32| -> f64 { (1..=n).map(|j| (j as f64).ln()).sum() };
        let mut log_w = ln_fact(total) - counts.iter().map(|&n| ln_fact(n)).sum::<f64>();
        for (zone, &n_c) in counts.iter().enumerate() {
            if n_c == 0 {
                continue;
            }
            let omega = self.flow.offered_traffic_bps(self.zones[zone].lambda_per_s);
            log_w += n_c as f64 * omega.ln();
            for j in 1..=n_c {
                let mut substituted = counts.clone();
                substituted[zone] = j;
                let sub_idx = self.space.require_index(&CellState::new(substituted))?;
                let eval = self.evals[sub_idx].as_ref().ok_or_else(|| {
                    Error::MissingPolicyState {
                        state: self.space.state(sub_idx).to_string(),
                    }
                })?;
                let delivered = j as f64 * eval.solution.user_rate_bps(zone);
                if delivered <= 0.0 {
                    return Err(
                        Error::StarvedZone { zone }.in_state(self.space.state(sub_idx))
                    );
                }
                log_w -= delivered.ln();
            }
        }
        Ok(log_w)
    }

    /// Attaches blocking metrics to a normalized distribution.
    fn finish_distribution(
        &self,
        pi: Vec<f64>,
        gamma: f64,
        total_lambda: f64,
    ) -> StationaryDistribution {
        let blocking_probability: f64 = (0..self.space.len())
            .filter(|&idx| self.space.state(idx).total() == self.space.n_max())
            .map(|idx| pi[idx])
            .sum();
        StationaryDistribution {
            pi,
            gamma,
            blocking_probability,
            blocked_arrival_rate_per_s: total_lambda * blocking_probability,
        }
    }

    /// Global efficiency of the current assignment under a distribution:
    /// `sum_s pi(s) * eta_s`, the empty state contributing zero.
    pub fn global_efficiency(&self, dist: &StationaryDistribution) -> Result<f64> {
        let mut eta = 0.0;
        for idx in 0..self.space.len() {
            if dist.pi[idx] == 0.0 || self.space.state(idx).is_empty() {
                continue;
            }
            let eval = self.evals[idx]
                .as_ref()
                .ok_or_else(|| Error::MissingPolicyState {
                    state: self.space.state(idx).to_string(),
                })?;
            eta += dist.pi[idx] * eval.metrics.eta_bits_per_joule;
        }
        Ok(eta)
    }

    /// Full evaluation: distribution, global efficiency, and stationary
    /// means of power and throughput.
    pub fn evaluate(&self) -> Result<PolicyEvaluation> {
        let distribution = self.stationary_distribution()?;
        let eta_bits_per_joule = self.global_efficiency(&distribution)?;
        let mut mean_power_w = 0.0;
        let mut mean_throughput_bps = 0.0;
        for idx in 0..self.space.len() {
            if distribution.pi[idx] == 0.0 {
                continue;
            }
            if self.space.state(idx).is_empty() {
                mean_power_w += distribution.pi[idx] * self.fixed_cost_w;
                continue;
            }
            let eval = self.evals[idx]
                .as_ref()
                .ok_or_else(|| Error::MissingPolicyState {
                    state: self.space.state(idx).to_string(),
                })?;
            mean_power_w += distribution.pi[idx] * eval.metrics.power_w;
            mean_throughput_bps += distribution.pi[idx] * eval.metrics.throughput_bps;
        }
        Ok(PolicyEvaluation {
            distribution,
            eta_bits_per_joule,
            mean_power_w,
            mean_throughput_bps,
        })
    }
}

/// Solves the stationary distribution of `policy` in one call.
pub fn stationary_distribution(
    policy: &PowerPolicy,
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
) -> Result<StationaryDistribution> {
    let mut evaluator = PolicyEvaluator::new(space, zones, curve, traffic, flow, fixed_cost_w);
    evaluator.load_policy(policy)?;
    evaluator.stationary_distribution()
}

/// Global efficiency of `policy` in one call: `sum_s pi(s) * eta_s`.
pub fn global_efficiency(
    policy: &PowerPolicy,
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
) -> Result<f64> {
    let mut evaluator = PolicyEvaluator::new(space, zones, curve, traffic, flow, fixed_cost_w);
    evaluator.load_policy(policy)?;
    let dist = evaluator.stationary_distribution()?;
    evaluator.global_efficiency(&dist)
}
