//! Per-state queue-activity fixed point and state-level energy metrics.
//!
//! Fix an occupancy state. Each user alternates between receiving a packet
//! and idling until the next one is due: a flow demands `R_p = packet_bits /
//! packet_period_s` bits/s on average, while the channel grants an *active*
//! user `R_a` bits/s. The fraction of time a user's queue is busy is therefore
//! `phi = min(R_p / R_a, 1)`. But `R_a` itself depends on how many of the
//! other users are active at the same instant — the channel is shared equally
//! among simultaneously active users — which closes a fixed point:
//!
//! ```text
//! R_a[j] = R(rho_j) * E[ 1 / (1 + #other active users) ]
//! phi[j] = min(R_p / R_a[j], 1)
//! ```
//!
//! where the expectation treats every other user in zone `k` as independently
//! active with probability `phi[k]`. More activity anywhere means more
//! contention everywhere, so the update map is monotone increasing; iterating
//! it from the fully-active point yields a monotone decreasing orbit that
//! converges to the largest fixed point. Near the saturation kink
//! (`R_p = R_a`) the orbit can creep, so the iteration is accelerated by
//! safeguarded Aitken extrapolation, and a scalar bisection fallback covers
//! the (effectively one-dimensional) single-populated-zone case.
//!
//! With the fixed point in hand, a state's time-averaged throughput, radiated
//! power, and energy efficiency follow in closed form; see [`state_metrics`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate_model::{sinr, RateCurve, ZoneConfig};
use crate::state_space::CellState;

/// Demand side of a flow: periodic packets of fixed mean size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    /// Mean packet size, bits.
    pub packet_bits: f64,
    /// Mean packet inter-arrival period, seconds.
    pub packet_period_s: f64,
}

impl TrafficParams {
    /// Demanded rate `R_p = packet_bits / packet_period_s`, bits/s.
    pub fn packet_rate_bps(&self) -> f64 {
        self.packet_bits / self.packet_period_s
    }
}

/// Per-zone transmit powers, watts, one entry per zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    /// Number of zones covered.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for a zero-zone vector.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Power for `zone`, watts.
    pub fn get(&self, zone: usize) -> f64 {
        self.0[zone]
    }

    /// Raw slice view.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sum of all entries, watts.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Checks every entry against configured bounds.
    pub fn validate_bounds(&self, min_w: f64, max_w: f64) -> Result<()> {
        for (zone, &p) in self.0.iter().enumerate() {
            if !p.is_finite() || p < min_w || p > max_w {
                return Err(Error::PowerOutOfBounds {
                    zone,
                    power_w: p,
                    min_w,
                    max_w,
                });
            }
        }
        Ok(())
    }
}

/// Solution of the activity fixed point for one occupancy state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    /// Activity probability per zone; zero for zones without users.
    pub phi: Vec<f64>,
    /// Active-user throughput per zone, bits/s; zero for empty zones.
    pub r_active: Vec<f64>,
    /// Whether the iteration met the tolerance.
    pub converged: bool,
    /// Iterations spent.
    pub iterations: u32,
    /// Final residual `max_j |phi_j - min(R_p / R_a[j], 1)|`.
    pub residual: f64,
}

impl FixedPointSolution {
    /// Time-averaged rate one user in `zone` actually receives:
    /// `phi * R_a = min(R_p, R_a)`, bits/s.
    pub fn user_rate_bps(&self, zone: usize) -> f64 {
        self.phi[zone] * self.r_active[zone]
    }
}

/// Time-averaged performance of one occupancy state under fixed powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    /// Cell throughput summed over users, bits/s.
    pub throughput_bps: f64,
    /// Total consumed power: fixed cost plus radiated share, watts.
    pub power_w: f64,
    /// Energy efficiency `throughput / power`, bits per joule.
    pub eta_bits_per_joule: f64,
}

/// Numerical controls for the fixed-point iteration.
const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: u32 = 200_000;
/// Iteration budget when a scalar bisection rescue is available: past this
/// point the rescue is cheaper than letting a flat orbit creep.
const RESCUED_ITERATIONS: u32 = 1_024;
/// Aitken extrapolation is attempted once per this many plain steps.
const AITKEN_PERIOD: u32 = 16;

/// Activity probability of a queue offered `r_active` bits/s when busy.
///
/// Returns `min(R_p / r_active, 1)`. A zero active rate with positive demand
/// means the queue can never drain and is reported as starvation.
pub fn activity_probability(r_active: f64, traffic: &TrafficParams) -> Result<f64> {
    let r_p = traffic.packet_rate_bps();
    if r_active <= 0.0 {
        return Err(Error::StarvedZone { zone: 0 });
    }
    Ok((r_p / r_active).min(1.0))
}

/// Natural log of the binomial coefficient `C(n, k)`.
///
/// Computed in the log domain so probability assembly stays finite for any
/// occupancy the state space can hold.
fn ln_choose(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    // ln C(n, k) = sum_{j=1..k} ln((n - k + j) / j), exact enough at f64 for
    // the short products used here.
    let k = k.min(n - k);
    let mut acc = 0.0;
    for j in 1..=k {
        acc += ((n - k + j) as f64).ln() - (j as f64).ln();
    }
    acc
}

/// Probability mass function of `Binomial(n, p)` as a dense vector.
fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n as usize + 1];
    if n == 0 || p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n as usize] = 1.0;
        return pmf;
    }
    let (ln_p, ln_q) = (p.ln(), (1.0 - p).ln());
    for i in 0..=n {
        pmf[i as usize] = (ln_choose(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q).exp();
    }
    pmf
}

/// Visits every activity configuration `(i_1, ..., i_M)` with `i_k` drawn
/// from `0..pmfs[k].len()`, passing the configuration and its probability.
fn for_each_config(pmfs: &[Vec<f64>], mut visit: impl FnMut(&[u32], f64)) {
    let m = pmfs.len();
    let mut idx = vec![0u32; m];
    loop {
        let mut prob = 1.0;
        for (k, pmf) in pmfs.iter().enumerate() {
            prob *= pmf[idx[k] as usize];
        }
        visit(&idx, prob);
        // Odometer increment over the mixed-radix configuration vector.
        let mut k = 0;
        loop {
            if k == m {
                return;
            }
            idx[k] += 1;
            if (idx[k] as usize) < pmfs[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Expected share of the channel an active user of `zone` receives:
/// `E[1 / (1 + K)]`, where `K` counts the other active users — binomial over
/// the `counts[zone] - 1` peers in its own zone (probability `phi[zone]`)
/// plus binomials over the full populations of the other zones.
///
/// Multiplying by the full-channel rate `R(rho_zone)` gives the active-user
/// throughput `R_a[zone]`.
///
/// # Panics
///
/// Debug builds assert that `zone` has at least one user.
pub fn active_share_expectation(counts: &[u32], zone: usize, phi: &[f64]) -> f64 {
    debug_assert!(counts[zone] > 0, "share is defined for an existing user");
    let pmfs: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let peers = if k == zone { n - 1 } else { n };
            binomial_pmf(peers, phi[k])
        })
        .collect();
    let mut acc = 0.0;
    for_each_config(&pmfs, |idx, prob| {
        let active: u32 = idx.iter().sum();
        acc += prob / (1.0 + active as f64);
    });
    acc
}

/// Homogeneous closed form of [`active_share_expectation`] for a single zone
/// of `n_users` users, each active with probability `phi`:
/// `(1 - (1 - phi)^n) / (n * phi)`, with the limit value 1 as `phi -> 0`.
pub fn homogeneous_share_closed_form(n_users: u32, phi: f64) -> f64 {
    debug_assert!(n_users > 0);
    let n = n_users as f64;
    if phi < 1e-12 {
        return 1.0;
    }
    (1.0 - (1.0 - phi).powi(n_users as i32)) / (n * phi)
}

/// Expected radiated power averaged over the simultaneously active users:
/// `E[(sum_j P_j i_j) / (sum_j i_j)]`, excluding the all-idle configuration.
///
/// Each zone `k` contributes `i_k ~ Binomial(counts[k], phi[k])` active
/// users, every one radiating that zone's power `powers[k]`.
pub fn average_active_power(counts: &[u32], phi: &[f64], powers: &[f64]) -> f64 {
    let pmfs: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(k, &n)| binomial_pmf(n, phi[k]))
        .collect();
    let mut acc = 0.0;
    for_each_config(&pmfs, |idx, prob| {
        let active: u32 = idx.iter().sum();
        if active == 0 {
            return;
        }
        let radiated: f64 = idx
            .iter()
            .zip(powers)
            .map(|(&i, &p)| i as f64 * p)
            .sum();
        acc += prob * radiated / active as f64;
    });
    acc
}

/// Iterates `phi <- T(phi)` from the fully-active point until the residual
/// `max_j |T(phi)_j - phi_j|` over populated coordinates reaches tolerance.
///
/// `map` must be monotone increasing in every coordinate (more activity
/// anywhere raises contention everywhere), which makes the orbit from 1
/// monotone decreasing and convergent. The decay can creep when the local
/// contraction rate approaches 1 (power values near a demand threshold), so
/// two accelerations run periodically: Aitken extrapolation, accepted
/// whenever it at least halves the residual, and -- once Aitken stalls --
/// elimination of the fast coordinates inside a scalar bisection on the
/// slow one (see [`nested_rescue`]). An orbit restarted from an
/// extrapolated point is again monotone (in whichever direction it starts)
/// and heads to the same fixed point, and the rescue only returns verified
/// roots, so both accelerations are safe.
fn solve_monotone(
    n_coords: usize,
    populated: &[usize],
    budget: u32,
    tol: f64,
    rescue: bool,
    map: &mut dyn FnMut(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, bool, u32, f64) {
    let mut phi = vec![0.0; n_coords];
    for &j in populated {
        phi[j] = 1.0;
    }

    let mut history: Vec<Vec<f64>> = vec![phi.clone()];
    let mut iteration = 0u32;
    let mut residual = f64::INFINITY;
    // Consecutive Aitken periods without an accepted extrapolation, and the
    // stall count at which the nested rescue fires next (doubling after each
    // fruitless attempt, so unrescuable orbits stop paying for it).
    let mut stalled_periods = 0u32;
    let mut rescue_at = 2u32;
    while iteration < budget {
        iteration += 1;
        let next = map(&phi);
        residual = residual_of(&phi, &next, populated);
        if residual <= tol {
            return (phi, true, iteration, residual);
        }
        phi = next;
        history.push(phi.clone());
        if history.len() > 3 {
            history.remove(0);
        }

        if iteration.is_multiple_of(AITKEN_PERIOD) && history.len() == 3 {
            let (x0, x1, x2) = (&history[0], &history[1], &history[2]);
            let mut psi = x2.clone();
            for &j in populated {
                let d1 = x1[j] - x0[j];
                let d2 = x2[j] - x1[j];
                let denom = d2 - d1;
                if denom.abs() > 1e-15 {
                    psi[j] = (x2[j] - d2 * d2 / denom).clamp(0.0, 1.0);
                }
            }
            // Safeguard: take the extrapolation only when it clearly beats
            // the plain orbit; otherwise the orbit continues unperturbed.
            iteration += 1;
            let t_psi = map(&psi);
            let psi_residual = residual_of(&psi, &t_psi, populated);
            if psi_residual < 0.5 * residual {
                phi = t_psi;
                history.clear();
                history.push(phi.clone());
                stalled_periods = 0;
            } else if rescue {
                stalled_periods += 1;
                if stalled_periods >= rescue_at {
                    if let Some((rescued, rescued_residual)) =
                        nested_rescue(&phi, populated, tol, map)
                    {
                        return (rescued, true, iteration, rescued_residual);
                    }
                    stalled_periods = 0;
                    rescue_at = rescue_at.saturating_mul(2);
                }
            }
        }
    }
    if rescue {
        if let Some((rescued, rescued_residual)) = nested_rescue(&phi, populated, tol, map) {
            return (rescued, true, iteration, rescued_residual);
        }
    }
    (phi, false, iteration, residual)
}

/// Worst-coordinate distance between an iterate and its image.
fn residual_of(from: &[f64], to: &[f64], populated: &[usize]) -> f64 {
    populated
        .iter()
        .map(|&j| (to[j] - from[j]).abs())
        .fold(0.0f64, f64::max)
}

/// Finishes a creeping orbit by eliminating its fast coordinates.
///
/// Near a demand threshold the slowest mode of the iteration contracts at a
/// rate of 1 to within rounding, which defeats both plain iteration and
/// difference-based extrapolation (consecutive steps agree to fifteen
/// digits, so there is no difference left to extrapolate). That mode is
/// concentrated on the coordinate with the largest step; the others
/// re-equilibrate quickly at any frozen value of it. So: freeze the slow
/// coordinate, solve the fast subsystem by the same monotone iteration, and
/// bisect the slow coordinate's own residual, which brackets the joint
/// fixed point between 0 (image above) and 1 (image below). The assembled
/// point is verified against the full map before being returned, so a wrong
/// split costs evaluations, never correctness.
fn nested_rescue(
    phi: &[f64],
    populated: &[usize],
    tol: f64,
    map: &mut dyn FnMut(&[f64]) -> Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    const INNER_BUDGET: u32 = 8_192;
    let image = map(phi);
    let slow = *populated.iter().max_by(|&&a, &&b| {
        (image[a] - phi[a])
            .abs()
            .total_cmp(&(image[b] - phi[b]).abs())
    })?;
    let fast: Vec<usize> = populated.iter().copied().filter(|&j| j != slow).collect();

    // Equilibrium of the fast coordinates with the slow one frozen at `t`,
    // and the slow coordinate's image there. The subsystem keeps the full
    // map's monotone structure, so the inner iteration from 1 converges for
    // any `t`; it must not recurse into this rescue.
    let at_slow = |t: f64, map: &mut dyn FnMut(&[f64]) -> Vec<f64>| -> Option<(Vec<f64>, f64)> {
        let (mut x, converged, _, _) =
            solve_monotone(phi.len(), &fast, INNER_BUDGET, tol * 0.125, false, &mut |x| {
                let mut y = x.to_vec();
                y[slow] = t;
                map(&y)
            });
        if !converged {
            return None;
        }
        x[slow] = t;
        let image = map(&x);
        Some((x, image[slow]))
    };

    // g(t) = t - T_slow(t, fast equilibrium): negative at 0+ (the image of
    // an idle slow zone is positive), nonnegative at 1 (images are capped).
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (_, image_slow) = at_slow(mid, map)?;
        if mid - image_slow < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (psi, _) = at_slow(0.5 * (lo + hi), map)?;
    let image = map(&psi);
    let residual = residual_of(&psi, &image, populated);
    (residual <= tol).then_some((psi, residual))
}

/// Active-user throughput per zone at a given activity vector.
fn r_active_at(counts: &[u32], phi: &[f64], full_rate: &[f64]) -> Vec<f64> {
    counts
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            if n == 0 {
                0.0
            } else {
                full_rate[j] * active_share_expectation(counts, j, phi)
            }
        })
        .collect()
}

/// Solves the activity fixed point for a heterogeneous state.
///
/// Monotone iteration from the fully-active vector `phi = 1` with Aitken
/// acceleration (see the module docs). When the system is effectively
/// one-dimensional -- a single populated zone, or every populated zone
/// running at one shared rate -- and the iteration stalls, a bisection on
/// the scalar residual finishes the job.
///
/// # Errors
///
/// * [`Error::EmptyState`] when the state holds no users.
/// * [`Error::StarvedZone`] when a populated zone has zero power or zero rate.
/// * [`Error::NoConvergence`] when the iteration stalls on a coupled system.
pub fn solve_heterogeneous(
    state: &CellState,
    powers: &PowerVector,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
) -> Result<FixedPointSolution> {
    let counts = state.counts();
    if state.is_empty() {
        return Err(Error::EmptyState);
    }
    if counts.len() != zones.len() || powers.len() != zones.len() {
        return Err(Error::Config(format!(
            "state has {} zones, powers {}, config {}",
            counts.len(),
            powers.len(),
            zones.len()
        )));
    }
    let full_rate: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            if n == 0 {
                return Ok(0.0);
            }
            let p = powers.get(j);
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::StarvedZone { zone: j });
            }
            let rate = curve.throughput(sinr(p, zones[j].sigma2_w));
            if rate <= 0.0 {
                return Err(Error::StarvedZone { zone: j });
            }
            Ok(rate)
        })
        .collect::<Result<_>>()?;
    let r_p = traffic.packet_rate_bps();

    let populated: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] > 0).collect();
    // The iteration creeps when a power sits near a demand threshold (the
    // contraction rate approaches 1 and the steps flatten below what
    // extrapolation can resolve). Whenever every populated zone runs at one
    // common full rate -- always true with a single populated zone, and
    // routine for probes that assign one power to zones with equal noise --
    // the problem reduces to a scalar root find, so a short iteration budget
    // suffices: bisection finishes anything that creeps.
    let common_rate = full_rate[populated[0]];
    let rescuable = populated.iter().all(|&j| full_rate[j] == common_rate);
    let budget = if rescuable {
        RESCUED_ITERATIONS
    } else {
        MAX_ITERATIONS
    };
    let (phi, converged, iterations, residual) =
        solve_monotone(counts.len(), &populated, budget, TOLERANCE, true, &mut |phi| {
            let r_a = r_active_at(counts, phi, &full_rate);
            (0..counts.len())
                .map(|j| {
                    if counts[j] == 0 {
                        0.0
                    } else {
                        (r_p / r_a[j]).min(1.0)
                    }
                })
                .collect()
        });
    if converged {
        let r_active = r_active_at(counts, &phi, &full_rate);
        return Ok(FixedPointSolution {
            phi,
            r_active,
            converged: true,
            iterations,
            residual,
        });
    }
    if rescuable {
        return bisect_shared(counts, &populated, common_rate, r_p, iterations);
    }
    Err(Error::NoConvergence {
        residual,
        iterations,
    })
}

/// Solves the homogeneous (single-zone) fixed point at SINR `rho`.
///
/// Uses the closed-form share `(1 - (1 - phi)^N) / (N * phi)`, so it stays
/// cheap for any occupancy; agrees with [`solve_heterogeneous`] on one-zone
/// states to the iteration tolerance.
pub fn solve_homogeneous(
    n_users: u32,
    rho: f64,
    curve: &RateCurve,
    traffic: &TrafficParams,
) -> Result<FixedPointSolution> {
    if n_users == 0 {
        return Err(Error::EmptyState);
    }
    let rate = curve.throughput(rho);
    if rate <= 0.0 {
        return Err(Error::StarvedZone { zone: 0 });
    }
    let r_p = traffic.packet_rate_bps();
    let r_a_of = |phi: f64| rate * homogeneous_share_closed_form(n_users, phi);

    let (phi, converged, iterations, residual) =
        solve_monotone(1, &[0], RESCUED_ITERATIONS, TOLERANCE, true, &mut |phi| {
            vec![(r_p / r_a_of(phi[0])).min(1.0)]
        });
    if converged {
        return Ok(FixedPointSolution {
            r_active: vec![r_a_of(phi[0])],
            phi,
            converged: true,
            iterations,
            residual,
        });
    }
    bisect_shared(&[n_users], &[0], rate, r_p, iterations)
}

/// Bisection on `g(phi) = phi - min(R_p / R_a(phi), 1)` for a state whose
/// populated zones all run at the same full rate.
///
/// Equal rates make the symmetric activity vector invariant under the
/// fixed-point map: the peers any user sees merge into a single binomial
/// count over the remaining population, so the per-user share is the
/// homogeneous closed form for the total head count and the fixed point is
/// the root of a scalar equation. `rate * phi * share(phi)` is strictly
/// increasing, so the root (interior or at `phi = 1`) is unique, and `g`
/// runs from negative at 0+ to nonnegative at 1, so bisection always lands
/// on it.
fn bisect_shared(
    counts: &[u32],
    populated: &[usize],
    rate: f64,
    r_p: f64,
    iterations_spent: u32,
) -> Result<FixedPointSolution> {
    let total: u32 = populated.iter().map(|&j| counts[j]).sum();
    let share = |phi: f64| homogeneous_share_closed_form(total, phi);
    let g = |phi: f64| phi - (r_p / (rate * share(phi))).min(1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi_star = 0.5 * (lo + hi);
    let residual = g(phi_star).abs();
    if residual > TOLERANCE {
        return Err(Error::NoConvergence {
            residual,
            iterations: iterations_spent,
        });
    }
    let r_a_star = rate * share(phi_star);
    let mut phi = vec![0.0; counts.len()];
    let mut r_active = vec![0.0; counts.len()];
    for &j in populated {
        phi[j] = phi_star;
        r_active[j] = r_a_star;
    }
    Ok(FixedPointSolution {
        phi,
        r_active,
        converged: true,
        iterations: iterations_spent,
        residual,
    })
}

/// Time-averaged consumed power of a state: the fixed cost `b` plus the
/// expected radiated power averaged over the simultaneously active users
/// (see [`average_active_power`]). The empty state consumes exactly `b`.
pub fn state_power(counts: &[u32], powers: &PowerVector, phi: &[f64], fixed_cost_w: f64) -> f64 {
    fixed_cost_w + average_active_power(counts, phi, powers.as_slice())
}

/// Metrics derived from an already-solved fixed point.
pub fn metrics_from_solution(
    counts: &[u32],
    powers: &PowerVector,
    solution: &FixedPointSolution,
    fixed_cost_w: f64,
) -> StateMetrics {
    let throughput_bps: f64 = counts
        .iter()
        .enumerate()
        .map(|(j, &n)| n as f64 * solution.user_rate_bps(j))
        .sum();
    let power_w = state_power(counts, powers, &solution.phi, fixed_cost_w);
    StateMetrics {
        throughput_bps,
        power_w,
        eta_bits_per_joule: throughput_bps / power_w,
    }
}

/// Solves the fixed point for `state` and reports throughput, power, and
/// energy efficiency. See the module docs for the model.
pub fn state_metrics(
    state: &CellState,
    powers: &PowerVector,
    zones: &[ZoneConfig],
    curve: &RateCurve,
    traffic: &TrafficParams,
    fixed_cost_w: f64,
) -> Result<StateMetrics> {
    let solution = solve_heterogeneous(state, powers, zones, curve, traffic)?;
    Ok(metrics_from_solution(
        state.counts(),
        powers,
        &solution,
        fixed_cost_w,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    /// Constant 1 Mbit/s curve: a flat two-point table.
    fn flat_megabit_curve() -> RateCurve {
        RateCurve::table(vec![(-60.0, 1e6), (60.0, 1e6)]).unwrap()
    }

    fn traffic(r_p: f64) -> TrafficParams {
        TrafficParams {
            packet_bits: r_p,
            packet_period_s: 1.0,
        }
    }

    fn one_zone(sigma2_w: f64) -> Vec<ZoneConfig> {
        vec![ZoneConfig::new(0, sigma2_w, 1.0)]
    }

    #[test]
    fn activity_probability_examples() {
        let t = traffic(3e5);
        assert_eq!(activity_probability(1e6, &t).unwrap(), 0.3);
        assert_eq!(
            activity_probability(2e5, &t).unwrap(),
            1.0,
            "demand above supply saturates the queue"
        );
        assert!(activity_probability(0.0, &t).is_err(), "starved queue");
    }

    #[test]
    fn single_user_needs_no_contention_solve() {
        let sol = solve_homogeneous(1, 1.0, &flat_megabit_curve(), &traffic(3e5)).unwrap();
        assert!((sol.phi[0] - 0.3).abs() < EPS, "phi = R_p / R = 0.3");
        assert!((sol.r_active[0] - 1e6).abs() < EPS);
        assert!(sol.converged);
    }

    #[test]
    fn two_user_fixed_point_matches_quadratic_root() {
        // With N = 2 the fixed point solves phi * R * (1 - phi/2) = R_p,
        // i.e. phi^2 - 2 phi + 2 R_p / R = 0. Bisect that scalar equation
        // independently and compare.
        let (r, r_p) = (1e6, 3e5);
        let residual = |phi: f64| phi * r * (1.0 - phi / 2.0) - r_p;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);

        let sol = solve_homogeneous(2, 1.0, &flat_megabit_curve(), &traffic(r_p)).unwrap();
        assert!(
            (sol.phi[0] - oracle).abs() < 1e-8,
            "solver phi {} vs quadratic root {}",
            sol.phi[0],
            oracle
        );
        assert!((sol.phi[0] - 0.3675445).abs() < 1e-6);
        assert!((sol.r_active[0] - r_p / oracle).abs() < 1e-2);
    }

    #[test]
    fn overload_pins_activity_at_one() {
        // Demand 2 Mbit/s against a 1 Mbit/s channel shared by 4 users.
        let sol = solve_homogeneous(4, 1.0, &flat_megabit_curve(), &traffic(2e6)).unwrap();
        assert_eq!(sol.phi[0], 1.0);
        assert!((sol.r_active[0] - 2.5e5).abs() < EPS, "R/N = 0.25 Mbit/s");
        assert!(sol.iterations <= 2, "starts at the overloaded fixed point");
    }

    #[test]
    fn heterogeneous_reduces_to_homogeneous_for_one_zone() {
        let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        let t = traffic(12e6);
        let zones = one_zone(1e-3);
        let power = PowerVector(vec![0.05]);
        let rho = sinr(0.05, 1e-3);
        for n in 1..=6u32 {
            let hom = solve_homogeneous(n, rho, &curve, &t).unwrap();
            let het = solve_heterogeneous(
                &CellState::new(vec![n]),
                &power,
                &zones,
                &curve,
                &t,
            )
            .unwrap();
            assert!(
                (hom.phi[0] - het.phi[0]).abs() < 1e-9,
                "n = {n}: {} vs {}",
                hom.phi[0],
                het.phi[0]
            );
            assert!((hom.r_active[0] - het.r_active[0]).abs() < 1e-9 * hom.r_active[0]);
        }
    }

    #[test]
    fn symmetric_zones_get_symmetric_solutions() {
        let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        let t = traffic(12e6);
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0), ZoneConfig::new(1, 1e-3, 1.0)];
        let sol = solve_heterogeneous(
            &CellState::new(vec![2, 2]),
            &PowerVector(vec![0.02, 0.02]),
            &zones,
            &curve,
            &t,
        )
        .unwrap();
        assert!((sol.phi[0] - sol.phi[1]).abs() < 1e-12);
        assert!((sol.r_active[0] - sol.r_active[1]).abs() < 1e-6);
    }

    #[test]
    fn full_overload_splits_rate_evenly_across_users() {
        // Demand far above capacity: phi = 1 everywhere and each active user
        // holds 1/N(s) of its zone's full rate.
        let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        let t = traffic(1e9);
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0), ZoneConfig::new(1, 8e-3, 1.0)];
        let state = CellState::new(vec![2, 1]);
        let powers = PowerVector(vec![0.05, 0.05]);
        let sol = solve_heterogeneous(&state, &powers, &zones, &curve, &t).unwrap();
        assert_eq!(sol.phi, vec![1.0, 1.0]);
        for (j, zone) in zones.iter().enumerate() {
            let full = curve.throughput(sinr(0.05, zone.sigma2_w));
            assert!(
                (sol.r_active[j] - full / 3.0).abs() < 1e-6 * full,
                "zone {j} gets a third of its full rate"
            );
        }
    }

    #[test]
    fn starved_zone_is_an_error() {
        let curve = flat_megabit_curve();
        let t = traffic(3e5);
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0), ZoneConfig::new(1, 1e-3, 1.0)];
        let err = solve_heterogeneous(
            &CellState::new(vec![1, 1]),
            &PowerVector(vec![0.1, 0.0]),
            &zones,
            &curve,
            &t,
        )
        .unwrap_err();
        match err {
            Error::StarvedZone { zone } => assert_eq!(zone, 1),
            other => panic!("expected StarvedZone, got {other:?}"),
        }
        assert!(matches!(
            solve_heterogeneous(
                &CellState::new(vec![0, 0]),
                &PowerVector(vec![0.1, 0.1]),
                &zones,
                &curve,
                &t
            ),
            Err(Error::EmptyState)
        ));
    }

    #[test]
    fn state_power_examples() {
        // One user active 30% of the time at 1 W over a 0.1 W fixed cost.
        let p = state_power(&[1], &PowerVector(vec![1.0]), &[0.3], 0.1);
        assert!((p - 0.4).abs() < EPS, "0.1 + 0.3 * 1.0 = 0.4, got {p}");
        // Two users, phi = 0.5: radiated share is 1 - (1 - phi)^2 = 0.75.
        let p = state_power(&[2], &PowerVector(vec![1.0]), &[0.5], 0.1);
        assert!((p - 0.85).abs() < EPS, "0.1 + 0.75 * 1.0 = 0.85, got {p}");
        // The empty state only pays the fixed cost.
        let p = state_power(&[0], &PowerVector(vec![1.0]), &[0.0], 0.1);
        assert!((p - 0.1).abs() < EPS);
    }

    #[test]
    fn homogeneous_share_matches_expectation_sum() {
        // Spot check of the closed form against the explicit sum; the
        // acceptance suite sweeps this identity over many random points.
        for n in 1..=8u32 {
            for phi in [0.05, 0.37, 0.82, 1.0] {
                let sum = active_share_expectation(&[n], 0, &[phi]);
                let closed = homogeneous_share_closed_form(n, phi);
                assert!(
                    (sum - closed).abs() <= 1e-12 * closed,
                    "n = {n}, phi = {phi}: sum {sum} vs closed form {closed}"
                );
            }
        }
    }

    #[test]
    fn more_competitors_never_raise_the_share() {
        let phi = [0.6, 0.4];
        let base = active_share_expectation(&[2, 1], 0, &phi);
        let more_own = active_share_expectation(&[3, 1], 0, &phi);
        let more_other = active_share_expectation(&[2, 2], 0, &phi);
        assert!(more_own <= base + 1e-15);
        assert!(more_other <= base + 1e-15);
    }

    #[test]
    fn state_metrics_compose_throughput_power_and_eta() {
        // One user, flat 1 Mbit/s channel, demand 0.3 Mbit/s, 1 W zone power,
        // 0.1 W fixed cost: eta = 3e5 / 0.4.
        let m = state_metrics(
            &CellState::new(vec![1]),
            &PowerVector(vec![1.0]),
            &one_zone(1e-3),
            &flat_megabit_curve(),
            &traffic(3e5),
            0.1,
        )
        .unwrap();
        assert!((m.throughput_bps - 3e5).abs() < 1e-3);
        assert!((m.power_w - 0.4).abs() < 1e-9);
        assert!(
            (m.eta_bits_per_joule - 7.5e5).abs() < 1e-2,
            "eta = 3e5 / 0.4 = 7.5e5, got {}",
            m.eta_bits_per_joule
        );
    }

    #[test]
    fn overloaded_state_efficiency_is_rate_over_total_power() {
        // phi = 1: the whole zone power is radiated whenever anyone is
        // present, so eta = R / (b + P).
        let m = state_metrics(
            &CellState::new(vec![3]),
            &PowerVector(vec![0.5]),
            &one_zone(1e-3),
            &flat_megabit_curve(),
            &traffic(2e6),
            0.1,
        )
        .unwrap();
        assert!((m.throughput_bps - 1e6).abs() < 1e-3);
        assert!((m.power_w - 0.6).abs() < EPS);
        assert!((m.eta_bits_per_joule - 1e6 / 0.6).abs() < 1e-2);
    }

    #[test]
    fn swapping_symmetric_zones_swaps_nothing() {
        let curve = RateCurve::analytic(20e6, 0.6, 100e6).unwrap();
        let t = traffic(12e6);
        let zones = vec![ZoneConfig::new(0, 1e-3, 1.0), ZoneConfig::new(1, 1e-3, 2.0)];
        let a = state_metrics(
            &CellState::new(vec![2, 1]),
            &PowerVector(vec![0.03, 0.01]),
            &zones,
            &curve,
            &t,
            0.1,
        )
        .unwrap();
        let b = state_metrics(
            &CellState::new(vec![1, 2]),
            &PowerVector(vec![0.01, 0.03]),
            &zones,
            &curve,
            &t,
            0.1,
        )
        .unwrap();
        assert!((a.eta_bits_per_joule - b.eta_bits_per_joule).abs() < 1e-9 * a.eta_bits_per_joule);
    }
}
