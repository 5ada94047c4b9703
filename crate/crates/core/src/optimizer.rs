//! Power-policy optimization: per-state ("local") and distribution-aware
//! ("global").
//!
//! The local problem treats each occupancy state on its own: choose per-zone
//! powers maximizing that state's energy efficiency `eta_s`. Zones with the
//! same noise level and the same occupancy are exchangeable, so they share
//! one power coordinate; each coordinate is optimized by a geometric grid
//! scan followed by golden-section refinement in the log-power domain, and
//! the coordinates are cycled until the objective stops moving.
//!
//! The global problem chooses the whole policy at once: maximize the
//! traffic-averaged efficiency `eta_hat` subject to the blocking constraint.
//! Because changing one state's powers shifts the stationary distribution —
//! and with it every state's weight — the states cannot be decoupled.
//! [`optimize_policy`] runs cyclic coordinate ascent over states against the
//! penalized objective `eta_hat - w * max(0, blocking - epsilon)`, seeded
//! from the local policy (so the result can never fall below it) plus a few
//! random restarts.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed_point::{state_metrics, PowerVector, StateMetrics, TrafficParams};
use crate::flow_level::{FlowParams, PolicyEvaluation, PolicyEvaluator, PowerPolicy};
use crate::rate_model::{RateCurve, ZoneConfig};
use crate::state_space::{CellState, StateSpace};

/// Search controls shared by the local and global optimizers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Grid density of the power scan, points per decade of power.
    pub grid_points_per_decade: u32,
    /// Relative objective improvement below which cycling stops.
    pub rel_tolerance: f64,
    /// Upper bound on coordinate-ascent sweeps.
    pub max_sweeps: u32,
    /// Random restarts for the global search, beyond the local-policy seed.
    pub multistart_seeds: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_points_per_decade: 12,
            rel_tolerance: 1e-6,
            max_sweeps: 40,
            multistart_seeds: 2,
        }
    }
}

impl OptimizerConfig {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_decade < 4 {
            return Err(Error::Config(
                "grid_points_per_decade must be at least 4".into(),
            ));
        }
        if !self.rel_tolerance.is_finite() || self.rel_tolerance <= 0.0 {
            return Err(Error::Config("rel_tolerance must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of the global policy search.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// The best policy found.
    pub policy: PowerPolicy,
    /// Its global efficiency `eta_hat`, bits per joule.
    pub objective_bits_per_joule: f64,
    /// Its blocking probability.
    pub blocking_probability: f64,
    /// Whether the blocking constraint is met.
    pub feasible: bool,
    /// Penalized objective after the seed and after each ascent sweep of the
    /// winning restart; nondecreasing by construction.
    pub trace: Vec<f64>,
}

/// Geometric grid of `n` points spanning `[lo, hi]`, endpoints exact.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = hi / lo;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64))
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// Power scan grid between the bounds at the configured density.
pub fn power_grid(p_min_w: f64, p_max_w: f64, points_per_decade: u32) -> Vec<f64> {
    let decades = (p_max_w / p_min_w).log10();
    let n = ((decades * points_per_decade as f64).ceil() as usize + 1).max(2);
    geometric_grid(p_min_w, p_max_w, n)
}

/// Identity of an exchangeable-zone group: the noise level (as raw bits, so
/// it can key a hash map) and the occupancy its members share.
type GroupKey = (u64, u32);

/// Exchangeable-zone groups of one state: zones sharing a noise level and an
/// occupancy share one power coordinate. Returns `(key, members)` pairs for
/// populated zones, in order of first appearance.
fn zone_groups(counts: &[u32], zones: &[ZoneConfig]) -> Vec<(GroupKey, Vec<usize>)> {
    let mut groups: Vec<(GroupKey, Vec<usize>)> = Vec::new();
    for (zone, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let key = (zones[zone].sigma2_w.to_bits(), n);
        if let Some(entry) = groups.iter_mut().find(|(k, _)| *k == key) {
            entry.1.push(zone);
        } else {
            groups.push((key, vec![zone]));
        }
    }
    groups
}

/// Expands group power assignments to a full per-zone vector, with
/// unpopulated zones pinned at the lower power bound (they never transmit,
/// so the value is conventional).
fn expand_groups(
    n_zones: usize,
    groups: &[(GroupKey, Vec<usize>)],
    assignment: &[f64],
    p_min_w: f64,
) -> PowerVector {
    let mut powers = vec![p_min_w; n_zones];
    for (g, (_, members)) in groups.iter().enumerate() {
        for &zone in members {
            powers[zone] = assignment[g];
        }
    }
    PowerVector(powers)
}

/// Inverse golden ratio for section search.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of `f` over `[lo, hi]` in the log domain.
/// `f` returning `None` (an invalid power for this state) counts as minus
/// infinity. Returns the best point probed.
fn golden_refine(lo: f64, hi: f64, mut f: impl FnMut(f64) -> Option<f64>) -> (f64, Option<f64>) {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let score = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1.exp());
    let mut f2 = f(x2.exp());
    for _ in 0..60 {
        if score(f1) >= score(f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1.exp());
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2.exp());
        }
    }
    if score(f1) >= score(f2) {
        (x1.exp(), f1)
    } else {
        (x2.exp(), f2)
    }
}

/// Per-state optimum: powers maximizing this state's energy efficiency.
///
/// Exchangeable zones share a coordinate; each coordinate is grid-scanned
/// and golden-refined, cycling until the efficiency improvement falls below
/// the relative tolerance. Exact ties prefer the lower power.
#[allow(clippy::too_many_arguments)]
pub fn optimize_state(
    state: &CellState,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    fixed_cost_w: f64,
    p_min_w: f64,
    p_max_w: f64,
    cfg: &OptimizerConfig,
) -> Result<(PowerVector, StateMetrics)> {
    cfg.validate()?;
    if state.is_empty() {
        return Err(Error::EmptyState);
    }
    let counts = state.counts();
    let groups = zone_groups(counts, zones);
    let grid = power_grid(p_min_w, p_max_w, cfg.grid_points_per_decade);

    // Evaluate one group assignment; None marks powers this state cannot use
    // (e.g. a table curve granting zero rate at the low end).
    let eval = |assignment: &[f64]| -> Result<Option<StateMetrics>> {
        let powers = expand_groups(counts.len(), &groups, assignment, p_min_w);
        match state_metrics(state, &powers, zones, curve, traffic, fixed_cost_w) {
            Ok(m) => Ok(Some(m)),
            Err(Error::StarvedZone { .. }) => Ok(None),
            Err(Error::StateEvaluation { source, .. })
                if matches!(*source, Error::StarvedZone { .. }) =>
            {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    let mid = grid[grid.len() / 2];
    let mut assignment = vec![mid; groups.len()];
    let mut best_metrics = eval(&assignment)?;
    let mut best_eta = best_metrics
        .as_ref()
        .map(|m| m.eta_bits_per_joule)
        .unwrap_or(f64::NEG_INFINITY);

    for _sweep in 0..cfg.max_sweeps {
        let eta_before = best_eta;
        for g in 0..groups.len() {
            let original = assignment[g];
            // Grid scan: strict improvement keeps the lowest power on ties.
            let mut scan_best: Option<(usize, f64, StateMetrics)> = None;
            for (i, &v) in grid.iter().enumerate() {
                assignment[g] = v;
                if let Some(m) = eval(&assignment)? {
                    let better = match &scan_best {
                        None => true,
                        Some((_, eta, _)) => m.eta_bits_per_joule > *eta,
                    };
                    if better {
                        scan_best = Some((i, m.eta_bits_per_joule, m));
                    }
                }
            }
            let Some((i, scan_eta, scan_metrics)) = scan_best else {
                assignment[g] = original;
                continue;
            };
            let mut chosen = (grid[i], scan_eta, scan_metrics);

            // Refine between the grid neighbors of the best point.
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            if hi > lo {
                let mut refine_err = None;
                let (v, metrics) = golden_refine(lo, hi, |p| {
                    assignment[g] = p;
                    match eval(&assignment) {
                        Ok(m) => m.map(|m| m.eta_bits_per_joule),
                        Err(e) => {
                            refine_err = Some(e);
                            None
                        }
                    }
                });
                if let Some(e) = refine_err {
                    return Err(e);
                }
                if let Some(eta) = metrics {
                    if eta > chosen.1 {
                        assignment[g] = v;
                        if let Some(m) = eval(&assignment)? {
                            chosen = (v, eta, m);
                        }
                    }
                }
            }

            if chosen.1 > best_eta || best_metrics.is_none() {
                assignment[g] = chosen.0;
                best_eta = chosen.1;
                best_metrics = Some(chosen.2);
            } else {
                // Nothing beat the incumbent value (which may sit off-grid
                // after earlier refinement); keep it.
                assignment[g] = original;
            }
        }
        if best_eta.is_finite()
            && (best_eta - eta_before) <= cfg.rel_tolerance * eta_before.abs().max(1e-12)
        {
            break;
        }
    }

    let metrics = best_metrics.ok_or(Error::StarvedZone { zone: 0 })?;
    Ok((
        expand_groups(counts.len(), &groups, &assignment, p_min_w),
        metrics,
    ))
}

/// Local policy: every nonempty state gets its own per-state optimum.
///
/// States whose populated-zone profiles (noise level, occupancy) coincide
/// share a solution, so symmetric configurations are solved once. The result
/// is independent of the arrival rates — only occupancy matters per state —
/// which lets traffic sweeps reuse one local policy.
#[allow(clippy::too_many_arguments)]
pub fn local_policy(
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    fixed_cost_w: f64,
    p_min_w: f64,
    p_max_w: f64,
    cfg: &OptimizerConfig,
) -> Result<PowerPolicy> {
    let mut policy = PowerPolicy::empty(space);
    // Profile -> per-group power, keyed by (noise bits, occupancy).
    let mut cache: HashMap<Vec<GroupKey>, HashMap<GroupKey, f64>> = HashMap::new();
    for idx in 0..space.len() {
        let state = space.state(idx);
        if state.is_empty() {
            continue;
        }
        let groups = zone_groups(state.counts(), zones);
        let mut profile: Vec<GroupKey> = groups.iter().map(|(k, _)| *k).collect();
        profile.sort_unstable();
        let powers = if let Some(solved) = cache.get(&profile) {
            let assignment: Vec<f64> = groups.iter().map(|(k, _)| solved[k]).collect();
            expand_groups(state.counts().len(), &groups, &assignment, p_min_w)
        } else {
            let (powers, _) = optimize_state(
                state,
                zones,
                curve,
                traffic,
                fixed_cost_w,
                p_min_w,
                p_max_w,
                cfg,
            )?;
            let solved: HashMap<GroupKey, f64> = groups
                .iter()
                .map(|(k, members)| (*k, powers.get(members[0])))
                .collect();
            cache.insert(profile, solved);
            powers
        };
        policy.set(idx, powers);
    }
    Ok(policy)
}

/// One ranked point of the global search.
struct Candidate {
    policy: PowerPolicy,
    eta: f64,
    blocking: f64,
    total_power: f64,
    violation: f64,
}

impl Candidate {
    fn from_eval(policy: PowerPolicy, eval: &PolicyEvaluation, epsilon: f64) -> Self {
        let total_power = policy.assigned().map(|p| p.total()).sum();
        Self {
            policy,
            eta: eval.eta_bits_per_joule,
            blocking: eval.distribution.blocking_probability,
            total_power,
            violation: (eval.distribution.blocking_probability - epsilon).max(0.0),
        }
    }

    fn feasible(&self) -> bool {
        self.violation == 0.0
    }

    /// Feasible beats infeasible; among feasible, higher efficiency then
    /// lower total power; among infeasible, smaller violation then higher
    /// efficiency.
    fn beats(&self, other: &Self) -> bool {
        match (self.feasible(), other.feasible()) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => {
                self.eta > other.eta
                    || (self.eta == other.eta && self.total_power < other.total_power)
            }
            (false, false) => {
                self.violation < other.violation
                    || (self.violation == other.violation && self.eta > other.eta)
            }
        }
    }
}

/// Global policy search: maximize `eta_hat` under the blocking constraint.
///
/// Cyclic coordinate ascent over states re-optimizes one state's power
/// coordinates at a time against the penalized objective
/// `eta_hat - w * max(0, blocking - epsilon)`, recomputing the stationary
/// distribution at every probe. The first seed is the local policy — ascent
/// only ever accepts improvements, so the result never falls below it — and
/// the remaining seeds are log-uniform random policies drawn from a fixed
/// stream so runs stay reproducible.
#[allow(clippy::too_many_arguments)]
pub fn optimize_policy(
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
    p_min_w: f64,
    p_max_w: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let epsilon = flow.epsilon;
    let local = local_policy(
        space,
        zones,
        curve,
        traffic,
        fixed_cost_w,
        p_min_w,
        p_max_w,
        cfg,
    )?;

    let total_lambda: f64 = zones.iter().map(|z| z.lambda_per_s).sum();
    if total_lambda == 0.0 {
        // Every policy scores zero; return the seed unchanged.
        return Ok(OptimizationResult {
            policy: local,
            objective_bits_per_joule: 0.0,
            blocking_probability: 0.0,
            feasible: true,
            trace: vec![0.0],
        });
    }

    // Penalty weight: large against the local efficiency scale, so any
    // constraint violation outweighs any efficiency gain.
    let mut evaluator = PolicyEvaluator::new(space, zones, curve, traffic, flow, fixed_cost_w);
    evaluator.load_policy(&local)?;
    let local_eval = evaluator.evaluate()?;
    let penalty_w = 1e4 * local_eval.eta_bits_per_joule.max(1e-6);

    let grid = power_grid(p_min_w, p_max_w, cfg.grid_points_per_decade);
    let mut best: Option<(Candidate, Vec<f64>)> = None;

    for seed_index in 0..=cfg.multistart_seeds {
        let seed_policy = if seed_index == 0 {
            local.clone()
        } else {
            random_policy(space, zones, p_min_w, p_max_w, seed_index)
        };
        let (candidate, trace) = ascend(
            space,
            zones,
            curve,
            traffic,
            flow,
            fixed_cost_w,
            &seed_policy,
            &grid,
            penalty_w,
            epsilon,
            cfg,
        )?;
        let replace = match &best {
            None => true,
            Some((incumbent, _)) => candidate.beats(incumbent),
        };
        if replace {
            best = Some((candidate, trace));
        }
    }

    let (winner, trace) = best.expect("at least the local seed ran");
    Ok(OptimizationResult {
        feasible: winner.feasible(),
        objective_bits_per_joule: winner.eta,
        blocking_probability: winner.blocking,
        policy: winner.policy,
        trace,
    })
}

/// Log-uniform random policy for multistart restarts, drawn from a fixed
/// stream (`restart` indexes the stream) for reproducibility.
fn random_policy(
    space: &StateSpace,
    zones: &[ZoneConfig],
    p_min_w: f64,
    p_max_w: f64,
    restart: u32,
) -> PowerPolicy {
    const STREAM_TAG: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut rng = ChaCha8Rng::seed_from_u64(STREAM_TAG ^ restart as u64);
    let span = (p_max_w / p_min_w).ln();
    let mut policy = PowerPolicy::empty(space);
    for idx in 0..space.len() {
        let state = space.state(idx);
        if state.is_empty() {
            continue;
        }
        let groups = zone_groups(state.counts(), zones);
        let assignment: Vec<f64> = (0..groups.len())
            .map(|_| p_min_w * (rng.gen::<f64>() * span).exp())
            .collect();
        policy.set(
            idx,
            expand_groups(state.counts().len(), &groups, &assignment, p_min_w),
        );
    }
    policy
}

/// Penalized objective of one evaluation.
fn penalized(eval: &PolicyEvaluation, penalty_w: f64, epsilon: f64) -> f64 {
    eval.eta_bits_per_joule
        - penalty_w * (eval.distribution.blocking_probability - epsilon).max(0.0)
}

/// Coordinate ascent over states from one seed; returns the best candidate
/// along the way and the per-sweep penalized-objective trace.
#[allow(clippy::too_many_arguments)]
fn ascend(
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
    seed: &PowerPolicy,
    grid: &[f64],
    penalty_w: f64,
    epsilon: f64,
    cfg: &OptimizerConfig,
) -> Result<(Candidate, Vec<f64>)> {
    let mut evaluator = PolicyEvaluator::new(space, zones, curve, traffic, flow, fixed_cost_w);
    evaluator.load_policy(seed)?;
    let mut current_eval = evaluator.evaluate()?;
    let mut f_current = penalized(&current_eval, penalty_w, epsilon);
    let mut best = Candidate::from_eval(evaluator.policy(), &current_eval, epsilon);
    let mut trace = vec![f_current];

    let p_min_w = grid[0];
    for _sweep in 0..cfg.max_sweeps {
        let f_before = f_current;
        for idx in 0..space.len() {
            let state = space.state(idx);
            if state.is_empty() {
                continue;
            }
            let groups = zone_groups(state.counts(), zones);
            for g in 0..groups.len() {
                let original = evaluator
                    .state_eval(idx)
                    .expect("seeded policy covers all states")
                    .powers
                    .clone();
                let mut assignment: Vec<f64> = groups
                    .iter()
                    .map(|(_, members)| original.get(members[0]))
                    .collect();
                let mut winner: Option<(f64, PolicyEvaluation, f64)> = None;
                for &v in grid {
                    assignment[g] = v;
                    let powers =
                        expand_groups(state.counts().len(), &groups, &assignment, p_min_w);
                    match evaluator.set_state_powers(idx, powers) {
                        Ok(()) => {}
                        Err(Error::StateEvaluation { source, .. })
                            if matches!(*source, Error::StarvedZone { .. }) =>
                        {
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                    let eval = evaluator.evaluate()?;
                    let f = penalized(&eval, penalty_w, epsilon);
                    let improves = match &winner {
                        None => f > f_current,
                        Some((best_f, _, _)) => f > *best_f,
                    };
                    if improves {
                        winner = Some((f, eval, v));
                    }
                }
                match winner {
                    Some((f, eval, v)) => {
                        assignment[g] = v;
                        let powers =
                            expand_groups(state.counts().len(), &groups, &assignment, p_min_w);
                        evaluator.set_state_powers(idx, powers)?;
                        f_current = f;
                        current_eval = eval;
                        let candidate =
                            Candidate::from_eval(evaluator.policy(), &current_eval, epsilon);
                        if candidate.beats(&best) {
                            best = candidate;
                        }
                    }
                    None => {
                        // No grid value improved on the incumbent powers.
                        evaluator.set_state_powers(idx, original)?;
                    }
                }
            }
        }
        trace.push(f_current);
        if (f_current - f_before) <= cfg.rel_tolerance * f_before.abs().max(1e-12) {
            break;
        }
    }
    Ok((best, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    const KNEE_TOL: f64 = 1e-8;

    fn default_curve() -> RateCurve {
        RateCurve::analytic(20e6, 0.6, 100e6).unwrap()
    }

    fn traffic(r_p: f64) -> TrafficParams {
        TrafficParams {
            packet_bits: r_p,
            packet_period_s: 1.0,
        }
    }

    #[test]
    fn geometric_grid_spans_bounds_evenly() {
        let grid = power_grid(1e-3, 1e-1, 12);
        assert_eq!(grid.len(), 25, "two decades at 12 points per decade");
        assert_eq!(grid[0], 1e-3);
        assert_eq!(grid[24], 1e-1);
        for w in grid.windows(2) {
            let ratio = w[1] / w[0];
            assert!(
                (ratio - grid[1] / grid[0]).abs() < 1e-12,
                "grid must be geometric"
            );
        }
    }

    #[test]
    fn saturated_single_user_peaks_at_the_efficiency_knee() {
        // Demand far above the cap: eta(P) = R(P) / (b + P), maximized where
        // the marginal rate equals the average rate. Compare against a dense
        // scan oracle.
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0)];
        let curve = default_curve();
        let t = traffic(1e9);
        let (powers, metrics) = optimize_state(
            &CellState::new(vec![1]),
            &zones,
            &curve,
            &t,
            0.1,
            1e-4,
            10.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        let dense = geometric_grid(1e-4, 10.0, 20_000);
        let oracle = dense
            .iter()
            .map(|&p| {
                let m = state_metrics(
                    &CellState::new(vec![1]),
                    &PowerVector(vec![p]),
                    &zones,
                    &curve,
                    &t,
                    0.1,
                )
                .unwrap();
                m.eta_bits_per_joule
            })
            .fold(0.0f64, f64::max);
        assert!(
            metrics.eta_bits_per_joule >= oracle * (1.0 - KNEE_TOL),
            "optimizer eta {} vs dense-scan {}",
            metrics.eta_bits_per_joule,
            oracle
        );
        assert!(powers.get(0) > 1e-4 && powers.get(0) < 10.0, "interior peak");
    }

    #[test]
    fn threshold_regime_delivers_exactly_the_demand() {
        // Demand 12 Mbit/s equals the rate at SINR 1, so the efficient power
        // sits at the demand threshold P = sigma2.
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0)];
        let (powers, metrics) = optimize_state(
            &CellState::new(vec![1]),
            &zones,
            &default_curve(),
            &traffic(12e6),
            0.1,
            1e-4,
            10.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        let p = powers.get(0);
        assert!(
            (p - 1e-3).abs() < 0.02e-3,
            "threshold power should be near sigma2 = 1e-3 W, got {p}"
        );
        assert!((metrics.throughput_bps - 12e6).abs() < 0.05e6);
    }

    #[test]
    fn unpopulated_zones_are_pinned_at_the_lower_bound() {
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0), ZoneConfig::new(1, 8e-3, 1.0)];
        let (powers, _) = optimize_state(
            &CellState::new(vec![2, 0]),
            &zones,
            &default_curve(),
            &traffic(12e6),
            0.1,
            1e-4,
            1.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(powers.get(1), 1e-4, "empty zone never transmits");
        assert!(powers.get(0) > 1e-4);
    }

    #[test]
    fn exchangeable_zones_share_one_power() {
        let zones = vec![ZoneConfig::new(0, 1e-3, 0.5), ZoneConfig::new(1, 1e-3, 1.5)];
        let (powers, _) = optimize_state(
            &CellState::new(vec![2, 2]),
            &zones,
            &default_curve(),
            &traffic(12e6),
            0.1,
            1e-4,
            1.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(
            powers.get(0),
            powers.get(1),
            "same noise and occupancy share a coordinate"
        );
    }

    #[test]
    fn local_policy_ignores_arrival_rates() {
        let space = StateSpace::new(2, 2).unwrap();
        let curve = default_curve();
        let t = traffic(12e6);
        let quiet = vec![ZoneConfig::new(0, 1e-3, 0.1), ZoneConfig::new(1, 8e-3, 0.2)];
        let busy = vec![ZoneConfig::new(0, 1e-3, 1.9), ZoneConfig::new(1, 8e-3, 0.7)];
        let cfg = OptimizerConfig::default();
        let a = local_policy(&space, &quiet, &curve, &t, 0.1, 1e-4, 1.0, &cfg).unwrap();
        let b = local_policy(&space, &busy, &curve, &t, 0.1, 1e-4, 1.0, &cfg).unwrap();
        assert_eq!(
            a.to_map(&space),
            b.to_map(&space),
            "per-state optima depend on occupancy, not on traffic"
        );
        // Every nonempty state is covered.
        assert_eq!(a.to_map(&space).len(), space.len() - 1);
    }

    #[test]
    fn zero_traffic_returns_the_seed() {
        let space = StateSpace::new(1, 2).unwrap();
        let zones = vec![ZoneConfig::new(0, 1e-3, 0.0)];
        let curve = default_curve();
        let t = traffic(12e6);
        let flow = FlowParams {
            file_bits: 5e6,
            epsilon: 0.01,
        };
        let result = optimize_policy(
            &space,
            &zones,
            &curve,
            &t,
            &flow,
            0.1,
            1e-4,
            1.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(result.objective_bits_per_joule, 0.0);
        assert!(result.feasible);
        assert_eq!(result.trace, vec![0.0]);
        let local = local_policy(
            &space,
            &zones,
            &curve,
            &t,
            0.1,
            1e-4,
            1.0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(result.policy.to_map(&space), local.to_map(&space));
    }

    #[test]
    fn global_search_never_falls_below_the_local_seed() {
        let space = StateSpace::new(2, 3).unwrap();
        let zones = vec![ZoneConfig::new(0, 1e-3, 0.4), ZoneConfig::new(1, 3e-3, 1.2)];
        let curve = default_curve();
        let t = traffic(12e6);
        let flow = FlowParams {
            file_bits: 5e6,
            epsilon: 0.01,
        };
        let cfg = OptimizerConfig {
            multistart_seeds: 1,
            max_sweeps: 6,
            ..OptimizerConfig::default()
        };
        let local = local_policy(&space, &zones, &curve, &t, 0.1, 1e-4, 1.0, &cfg).unwrap();
        let mut ev = PolicyEvaluator::new(&space, &zones, &curve, &t, &flow, 0.1);
        ev.load_policy(&local).unwrap();
        let local_eval = ev.evaluate().unwrap();

        let result = optimize_policy(
            &space, &zones, &curve, &t, &flow, 0.1, 1e-4, 1.0, &cfg,
        )
        .unwrap();
        if local_eval.distribution.blocking_probability <= flow.epsilon {
            assert!(
                result.feasible,
                "feasible seed must yield a feasible result"
            );
            assert!(
                result.objective_bits_per_joule
                    >= local_eval.eta_bits_per_joule - 1e-12,
                "global {} fell below local {}",
                result.objective_bits_per_joule,
                local_eval.eta_bits_per_joule
            );
        }
        for w in result.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "ascent trace must be nondecreasing");
        }
        if result.feasible {
            assert!(result.blocking_probability <= flow.epsilon + 1e-12);
        }
    }
}
