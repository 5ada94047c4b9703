//! Discrete-event Monte Carlo of the flow-level occupancy chain.
//!
//! Arrivals form independent Poisson streams per zone; an arrival finding
//! the cell full is blocked and discarded. Residents depart zone `c` at the
//! state-dependent rate `N_c * phi_c * R_a_c / S` — exponential service
//! consistent with the Markov model that
//! [`crate::flow_level::PolicyEvaluator::stationary_distribution`] solves,
//! which makes the simulator an independent validation route for the
//! stationary law, the blocking probability, and the global efficiency.
//!
//! Time-weighted occupancy is accumulated between the warmup cutoff and the
//! horizon; each replication runs on its own deterministic random stream
//! derived from the master seed, so results are bitwise reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::TrafficParams;
use crate::flow_level::{FlowParams, PolicyEvaluator, PowerPolicy};
use crate::rate_model::{RateCurve, ZoneConfig};
use crate::state_space::StateSpace;

/// Monte Carlo run controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulated seconds per replication.
    pub horizon_s: f64,
    /// Leading seconds excluded from the occupancy and blocking metrics
    /// (the state evolution still runs through them).
    pub warmup_s: f64,
    /// Master seed; replication `r` uses the stream seeded `seed + r`.
    pub seed: u64,
    /// Independent replications to average.
    pub replications: u32,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.warmup_s >= 0.0 && self.horizon_s > self.warmup_s) {
            return Err(Error::Config(format!(
                "horizon {} s must exceed warmup {} s",
                self.horizon_s, self.warmup_s
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("at least one replication required".into()));
        }
        Ok(())
    }
}

/// Aggregated Monte Carlo estimates with across-replication standard errors.
///
/// The integer tallies cover the whole run from time zero (they satisfy exact
/// flow conservation); the empirical metrics cover only the post-warmup
/// window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Mean time fraction per state, aligned with the state enumeration.
    pub empirical_pi: Vec<f64>,
    /// Standard error per state across replications.
    pub pi_se: Vec<f64>,
    /// Mean blocked fraction of post-warmup arrivals.
    pub empirical_blocking: f64,
    /// Standard error of the blocked fraction across replications.
    pub blocking_se: f64,
    /// Mean occupancy-weighted efficiency `sum_s occupancy(s) * eta_s`,
    /// bits per joule — the empirical twin of the analytic global metric.
    pub empirical_eta: f64,
    /// Standard error of the efficiency estimate across replications.
    pub eta_se: f64,
    /// Arrivals generated over all replications, from time zero.
    pub offered: u64,
    /// Arrivals admitted.
    pub accepted: u64,
    /// Arrivals discarded because the cell was full.
    pub blocked: u64,
    /// Completed flows.
    pub departures: u64,
    /// Flows still in progress at the horizons.
    pub residual_users: u64,
    /// Events processed (arrivals offered plus departures).
    pub events: u64,
}

/// One simulated state change, for optional event traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    /// Simulated time, seconds.
    pub time_s: f64,
    /// `"arrival"`, `"blocked"`, or `"departure"`.
    pub event: &'static str,
    /// Zone the flow belongs to.
    pub zone: usize,
    /// Occupancy state after the event, as `"N1,N2,..."`.
    pub state_after: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    /// An arrival to `zone`; blocked arrivals are decided on processing.
    Arrival { zone: usize },
    /// A departure clock for `zone`, valid only while `version` matches the
    /// zone's current clock generation.
    Departure { zone: usize, version: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
}

impl Event {
    /// Arrivals sort before departures at equal times; the insertion
    /// sequence breaks remaining ties so the schedule is a total order.
    fn rank(&self) -> u8 {
        match self.kind {
            EventKind::Arrival { .. } => 0,
            EventKind::Departure { .. } => 1,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the max-heap pops the earliest event first.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.rank().cmp(&self.rank()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Per-replication tallies and window-normalized metrics.
struct Replication {
    occupancy: Vec<f64>,
    blocking: f64,
    eta: f64,
    offered: u64,
    accepted: u64,
    blocked: u64,
    departures: u64,
    residual: u64,
    events: u64,
}

/// Runs the Monte Carlo and returns aggregated estimates.
///
/// The policy must cover every nonempty state; its fixed points are solved
/// once up front, so a non-convergent state is reported before any event is
/// simulated.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    policy: &PowerPolicy,
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
    sim: &SimConfig,
) -> Result<SimResult> {
    let (result, _) = run(
        policy,
        space,
        zones,
        curve,
        traffic,
        flow,
        fixed_cost_w,
        sim,
        false,
    )?;
    Ok(result)
}

/// Like [`simulate`], also returning the event trace of the first
/// replication.
#[allow(clippy::too_many_arguments)]
pub fn simulate_with_trace(
    policy: &PowerPolicy,
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
    sim: &SimConfig,
) -> Result<(SimResult, Vec<TraceEvent>)> {
    run(
        policy, space, zones, curve, traffic, flow, fixed_cost_w, sim, true,
    )
}

#[allow(clippy::too_many_arguments)]
fn run(
    policy: &PowerPolicy,
    space: &StateSpace,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    flow: &FlowParams,
    fixed_cost_w: f64,
    sim: &SimConfig,
    want_trace: bool,
) -> Result<(SimResult, Vec<TraceEvent>)> {
    sim.validate()?;
    let mut evaluator = PolicyEvaluator::new(space, zones, curve, traffic, flow, fixed_cost_w);
    evaluator.load_policy(policy)?;

    // Departure rate and efficiency per (state, zone), fixed for the run.
    let mut rates = vec![vec![0.0; space.zones()]; space.len()];
    let mut eta = vec![0.0; space.len()];
    for idx in 0..space.len() {
        for (zone, rate) in rates[idx].iter_mut().enumerate() {
            *rate = evaluator.departure_rate(idx, zone)?;
        }
        if let Some(eval) = evaluator.state_eval(idx) {
            eta[idx] = eval.metrics.eta_bits_per_joule;
        }
    }

    let mut reps = Vec::with_capacity(sim.replications as usize);
    let mut trace = Vec::new();
    for rep in 0..sim.replications {
        let recorder = if want_trace && rep == 0 {
            Some(&mut trace)
        } else {
            None
        };
        reps.push(run_replication(
            space,
            zones,
            &rates,
            &eta,
            sim,
            sim.seed.wrapping_add(rep as u64),
            recorder,
        ));
    }
    Ok((aggregate(&reps, space.len()), trace))
}

fn run_replication(
    space: &StateSpace,
    zones: &[ZoneConfig],
    rates: &[Vec<f64>],
    eta: &[f64],
    sim: &SimConfig,
    stream_seed: u64,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Replication {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: EventKind| {
        heap.push(Event {
            time,
            kind,
            seq: *seq,
        });
        *seq += 1;
    };

    let exp_draw = |rng: &mut ChaCha8Rng, rate: f64| -> Option<f64> {
        if rate > 0.0 {
            Some(Exp::new(rate).expect("positive rate").sample(rng))
        } else {
            None
        }
    };

    for (zone, z) in zones.iter().enumerate() {
        if let Some(dt) = exp_draw(&mut rng, z.lambda_per_s) {
            push(&mut heap, &mut seq, dt, EventKind::Arrival { zone });
        }
    }

    let mut counts = vec![0u32; space.zones()];
    let mut state_idx = space
        .index_of(&crate::state_space::CellState::new(counts.clone()))
        .expect("empty state exists");
    let mut versions = vec![0u64; space.zones()];
    let mut occupancy = vec![0.0; space.len()];
    let mut now = 0.0f64;
    let (mut offered, mut accepted, mut blocked, mut departures) = (0u64, 0u64, 0u64, 0u64);
    let (mut offered_w, mut blocked_w) = (0u64, 0u64);
    let window = sim.horizon_s - sim.warmup_s;

    // Adds the occupancy of the current state over [now, until), clipped to
    // the measurement window.
    let settle = |occupancy: &mut Vec<f64>, now: f64, until: f64, idx: usize| {
        let lo = now.max(sim.warmup_s);
        let hi = until.min(sim.horizon_s);
        if hi > lo {
            occupancy[idx] += hi - lo;
        }
    };

    while let Some(event) = heap.pop() {
        if event.time > sim.horizon_s {
            break;
        }
        settle(&mut occupancy, now, event.time, state_idx);
        now = event.time;
        let mut transition = false;
        match event.kind {
            EventKind::Arrival { zone } => {
                offered += 1;
                if now >= sim.warmup_s {
                    offered_w += 1;
                }
                let total: u32 = counts.iter().sum();
                if total >= space.n_max() {
                    blocked += 1;
                    if now >= sim.warmup_s {
                        blocked_w += 1;
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(TraceEvent {
                            time_s: now,
                            event: "blocked",
                            zone,
                            state_after: space.state(state_idx).to_string(),
                        });
                    }
                } else {
                    accepted += 1;
                    counts[zone] += 1;
                    transition = true;
                }
                if let Some(dt) = exp_draw(&mut rng, zones[zone].lambda_per_s) {
                    push(
                        &mut heap,
                        &mut seq,
                        now + dt,
                        EventKind::Arrival { zone },
                    );
                }
                if transition {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(TraceEvent {
                            time_s: now,
                            event: "arrival",
                            zone,
                            state_after: crate::state_space::CellState::new(counts.clone())
                                .to_string(),
                        });
                    }
                }
            }
            EventKind::Departure { zone, version } => {
                if version != versions[zone] {
                    continue; // stale clock from a superseded state
                }
                departures += 1;
                counts[zone] -= 1;
                transition = true;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceEvent {
                        time_s: now,
                        event: "departure",
                        zone,
                        state_after: crate::state_space::CellState::new(counts.clone())
                            .to_string(),
                    });
                }
            }
        }
        if transition {
            state_idx = space
                .index_of(&crate::state_space::CellState::new(counts.clone()))
                .expect("transitions stay inside the enumeration");
            // Exponential clocks are memoryless, so re-drawing every zone's
            // departure clock in the new state is distribution-preserving.
            for zone in 0..space.zones() {
                versions[zone] += 1;
                if let Some(dt) = exp_draw(&mut rng, rates[state_idx][zone]) {
                    push(
                        &mut heap,
                        &mut seq,
                        now + dt,
                        EventKind::Departure {
                            zone,
                            version: versions[zone],
                        },
                    );
                }
            }
        }
    }
    settle(&mut occupancy, now, sim.horizon_s, state_idx);

    for o in &mut occupancy {
        *o /= window;
    }
    let eta_estimate: f64 = occupancy
        .iter()
        .zip(eta)
        .map(|(occ, e)| occ * e)
        .sum();
    Replication {
        blocking: if offered_w > 0 {
            blocked_w as f64 / offered_w as f64
        } else {
            0.0
        },
        eta: eta_estimate,
        occupancy,
        offered,
        accepted,
        blocked,
        departures,
        residual: counts.iter().map(|&n| n as u64).sum(),
        events: offered + departures,
    }
}

fn aggregate(reps: &[Replication], n_states: usize) -> SimResult {
    let n = reps.len() as f64;
    let mean_se = |values: Vec<f64>| -> (f64, f64) {
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return (mean, 0.0);
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };

    let mut empirical_pi = vec![0.0; n_states];
    let mut pi_se = vec![0.0; n_states];
    for s in 0..n_states {
        let (m, se) = mean_se(reps.iter().map(|r| r.occupancy[s]).collect());
        empirical_pi[s] = m;
        pi_se[s] = se;
    }
    let (empirical_blocking, blocking_se) = mean_se(reps.iter().map(|r| r.blocking).collect());
    let (empirical_eta, eta_se) = mean_se(reps.iter().map(|r| r.eta).collect());
    SimResult {
        empirical_pi,
        pi_se,
        empirical_blocking,
        blocking_se,
        empirical_eta,
        eta_se,
        offered: reps.iter().map(|r| r.offered).sum(),
        accepted: reps.iter().map(|r| r.accepted).sum(),
        blocked: reps.iter().map(|r| r.blocked).sum(),
        departures: reps.iter().map(|r| r.departures).sum(),
        residual_users: reps.iter().map(|r| r.residual).sum(),
        events: reps.iter().map(|r| r.events).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::PowerVector;
    use crate::flow_level::total_variation;

    fn flat_curve(rate: f64) -> RateCurve {
        RateCurve::table(vec![(-60.0, rate), (60.0, rate)]).unwrap()
    }

    struct Saturated {
        space: StateSpace,
        zones: Vec<ZoneConfig>,
        curve: RateCurve,
        traffic: TrafficParams,
        flow: FlowParams,
        policy: PowerPolicy,
    }

    impl Saturated {
        /// Single zone, flat 1 Mbit/s channel, demand pinned above capacity:
        /// an M/M/1/K queue with load lambda * S / R.
        fn new(lambda: f64, n_max: u32) -> Self {
            let space = StateSpace::new(1, n_max).unwrap();
            let policy = PowerPolicy::constant(&space, PowerVector(vec![1.0])).unwrap();
            Self {
                space,
                zones: vec![ZoneConfig::new(0, 1e-3, lambda)],
                curve: flat_curve(1e6),
                traffic: TrafficParams {
                    packet_bits: 2e6,
                    packet_period_s: 1.0,
                },
                flow: FlowParams {
                    file_bits: 1e6,
                    epsilon: 0.01,
                },
                policy,
            }
        }

        fn simulate(&self, sim: &SimConfig) -> SimResult {
            simulate(
                &self.policy,
                &self.space,
                &self.zones,
                &self.curve,
                &self.traffic,
                &self.flow,
                0.1,
                sim,
            )
            .unwrap()
        }
    }

    #[test]
    fn zero_traffic_stays_empty() {
        let model = Saturated::new(0.0, 3);
        let result = model.simulate(&SimConfig {
            horizon_s: 100.0,
            warmup_s: 10.0,
            seed: 7,
            replications: 2,
        });
        assert_eq!(result.empirical_pi[0], 1.0);
        assert_eq!(result.offered, 0);
        assert_eq!(result.empirical_blocking, 0.0);
        assert_eq!(result.empirical_eta, 0.0);
        assert_eq!(result.events, 0);
    }

    #[test]
    fn saturated_single_zone_matches_geometric_law() {
        let model = Saturated::new(0.5, 4);
        let result = model.simulate(&SimConfig {
            horizon_s: 5e4,
            warmup_s: 500.0,
            seed: 42,
            replications: 2,
        });
        // Analytic law from the balance solve.
        let dist = crate::flow_level::stationary_distribution(
            &model.policy,
            &model.space,
            &model.zones,
            &model.curve,
            &model.traffic,
            &model.flow,
            0.1,
        )
        .unwrap();
        let tv = total_variation(&result.empirical_pi, &dist.pi);
        assert!(tv < 0.02, "total variation {tv} exceeds 0.02");
        let diff = (result.empirical_blocking - dist.blocking_probability).abs();
        let budget = 3.0 * result.blocking_se.max(1e-3);
        assert!(
            diff < budget,
            "blocking {} vs analytic {} (budget {budget})",
            result.empirical_blocking,
            dist.blocking_probability
        );
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let model = Saturated::new(0.8, 3);
        let sim = SimConfig {
            horizon_s: 2e3,
            warmup_s: 100.0,
            seed: 12345,
            replications: 3,
        };
        let a = model.simulate(&sim);
        let b = model.simulate(&sim);
        assert_eq!(a, b, "same seed and config must reproduce exactly");
        let c = model.simulate(&SimConfig { seed: 12346, ..sim });
        assert_ne!(a, c, "different seed should perturb the sample path");
    }

    #[test]
    fn accepted_flows_are_conserved() {
        let model = Saturated::new(1.3, 4);
        let result = model.simulate(&SimConfig {
            horizon_s: 3e3,
            warmup_s: 0.0,
            seed: 99,
            replications: 3,
        });
        assert_eq!(result.offered, result.accepted + result.blocked);
        assert_eq!(
            result.accepted,
            result.departures + result.residual_users,
            "every admitted flow either departed or is still in service"
        );
        assert!(result.blocked > 0, "overloaded system should block");
        assert_eq!(result.events, result.offered + result.departures);
    }

    #[test]
    fn trace_records_first_replication() {
        let model = Saturated::new(0.7, 2);
        let sim = SimConfig {
            horizon_s: 50.0,
            warmup_s: 0.0,
            seed: 5,
            replications: 2,
        };
        let (result, trace) = simulate_with_trace(
            &model.policy,
            &model.space,
            &model.zones,
            &model.curve,
            &model.traffic,
            &model.flow,
            0.1,
            &sim,
        )
        .unwrap();
        assert!(!trace.is_empty());
        let mut last = 0.0;
        for ev in &trace {
            assert!(ev.time_s >= last, "trace must be time-ordered");
            last = ev.time_s;
            assert!(matches!(ev.event, "arrival" | "blocked" | "departure"));
            assert!(ev.state_after.parse::<crate::state_space::CellState>().is_ok());
        }
        // The trace belongs to replication 0 only, so it must not exceed the
        // run-wide event total.
        assert!((trace.len() as u64) <= result.events);
    }

    #[test]
    fn two_zone_paths_stay_within_capacity() {
        let space = StateSpace::new(2, 3).unwrap();
        let zones = vec![ZoneConfig::new(0, 1e-3, 0.6), ZoneConfig::new(1, 3e-3, 0.9)];
        let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        let traffic = TrafficParams {
            packet_bits: 12e6,
            packet_period_s: 1.0,
        };
        let flow = FlowParams {
            file_bits: 5e6,
            epsilon: 0.01,
        };
        let policy = PowerPolicy::constant(&space, PowerVector(vec![0.02, 0.01])).unwrap();
        let (result, trace) = simulate_with_trace(
            &policy,
            &space,
            &zones,
            &curve,
            &traffic,
            &flow,
            0.1,
            &SimConfig {
                horizon_s: 500.0,
                warmup_s: 0.0,
                seed: 11,
                replications: 1,
            },
        )
        .unwrap();
        for ev in &trace {
            let state: crate::state_space::CellState = ev.state_after.parse().unwrap();
            assert!(state.total() <= 3, "occupancy beyond capacity in trace");
        }
        assert!((result.empirical_pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
