//! Enumeration and indexing of cell occupancy states.
//!
//! A cell with `m` zones and an admission cap of `n_max` concurrent flows has
//! one occupancy state per vector `(N_1, ..., N_m)` with `sum N_j <= n_max`.
//! [`StateSpace`] enumerates those states in lexicographic order and provides
//! the dense index used everywhere else in the crate to cache per-state
//! solutions and to assemble the occupancy Markov chain.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Occupancy state: number of concurrent flows per zone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellState {
    counts: Vec<u32>,
}

impl CellState {
    /// Builds a state from per-zone flow counts.
    pub fn new(counts: Vec<u32>) -> Self {
        CellState { counts }
    }

    /// Per-zone counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of zones.
    pub fn zones(&self) -> usize {
        self.counts.len()
    }

    /// Total number of flows in the cell.
    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// True when no flows are present.
    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&n| n == 0)
    }

    /// Copy of this state with zone `zone` set to `count`, other zones kept.
    pub fn with_zone_count(&self, zone: usize, count: u32) -> Self {
        let mut counts = self.counts.clone();
        counts[zone] = count;
        CellState { counts }
    }
}

impl fmt::Display for CellState {
    /// Text form `N1,N2,...,NM` used by the CLI and policy files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for n in &self.counts {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for CellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let counts = s
            .split(',')
            .map(|part| {
                part.trim().parse::<u32>().map_err(|e| Error::BadState {
                    state: s.to_string(),
                    reason: format!("bad count {part:?}: {e}"),
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        if counts.is_empty() {
            return Err(Error::BadState {
                state: s.to_string(),
                reason: "no zone counts".into(),
            });
        }
        Ok(CellState { counts })
    }
}

/// Transition targets reachable from one state in a single event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transitions {
    /// `(zone, target state index)` for each admissible arrival.
    pub arrivals: Vec<(usize, usize)>,
    /// `(zone, target state index)` for each possible departure.
    pub departures: Vec<(usize, usize)>,
}

/// Enumerated admissible states with a dense index.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_zones: usize,
    n_max: u32,
    states: Vec<CellState>,
    index: HashMap<Vec<u32>, usize>,
}

impl StateSpace {
    /// Default ceiling on the number of enumerated states.
    pub const DEFAULT_CEILING: usize = 1_000_000;

    /// Enumerates all states with at most `n_max` total flows over `n_zones`
    /// zones, in lexicographic order, guarding against runaway sizes.
    ///
    /// The count is `C(n_max + m, m)`; enumeration is refused when it exceeds
    /// `ceiling`.
    pub fn enumerate(n_zones: usize, n_max: u32, ceiling: usize) -> Result<Self> {
        if n_zones == 0 {
            return Err(Error::Config("state space needs at least one zone".into()));
        }
        let count = state_count(n_zones, n_max);
        if count > ceiling as u128 {
            return Err(Error::StateSpaceTooLarge { count, ceiling });
        }
        let mut states = Vec::with_capacity(count as usize);
        let mut current = vec![0u32; n_zones];
        fill(&mut states, &mut current, 0, n_max);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.counts.clone(), i))
            .collect();
        Ok(StateSpace {
            n_zones,
            n_max,
            states,
            index,
        })
    }

    /// Enumerates with the default resource ceiling.
    pub fn new(n_zones: usize, n_max: u32) -> Result<Self> {
        Self::enumerate(n_zones, n_max, Self::DEFAULT_CEILING)
    }

    /// Number of zones.
    pub fn zones(&self) -> usize {
        self.n_zones
    }

    /// Admission cap on total flows.
    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Number of enumerated states (including the empty state).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// True only for a degenerate space, which cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at dense index `idx`.
    ///
    /// # Panics
    ///
    /// Panics when `idx` is out of range.
    pub fn state(&self, idx: usize) -> &CellState {
        &self.states[idx]
    }

    /// All states in enumeration order.
    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    /// Dense index of `state`, if admissible.
    pub fn index_of(&self, state: &CellState) -> Option<usize> {
        self.index.get(state.counts()).copied()
    }

    /// Dense index of `state`, or an error naming the state.
    pub fn require_index(&self, state: &CellState) -> Result<usize> {
        self.index_of(state).ok_or_else(|| Error::BadState {
            state: state.to_string(),
            reason: format!(
                "outside the admissible space ({} zones, n_max {})",
                self.n_zones, self.n_max
            ),
        })
    }

    /// Single-event neighbors of the state at `idx`.
    ///
    /// Arrivals exist only while the cell is below the admission cap;
    /// departures exist for every zone that has at least one flow.
    pub fn transitions(&self, idx: usize) -> Transitions {
        let state = &self.states[idx];
        let total = state.total();
        let mut arrivals = Vec::new();
        let mut departures = Vec::new();
        for zone in 0..self.n_zones {
            if total < self.n_max {
                let up = state.with_zone_count(zone, state.counts()[zone] + 1);
                arrivals.push((zone, self.index[up.counts()]));
            }
            if state.counts()[zone] > 0 {
                let down = state.with_zone_count(zone, state.counts()[zone] - 1);
                departures.push((zone, self.index[down.counts()]));
            }
        }
        Transitions {
            arrivals,
            departures,
        }
    }
}

/// Number of admissible states, `C(n_max + m, m)`, computed in `u128`.
pub fn state_count(n_zones: usize, n_max: u32) -> u128 {
    // C(n_max + m, m) with incremental division keeps intermediates exact.
    let m = n_zones as u128;
    let mut count: u128 = 1;
    for k in 1..=m {
        count = count * (n_max as u128 + k) / k;
    }
    count
}

fn fill(states: &mut Vec<CellState>, current: &mut Vec<u32>, zone: usize, remaining: u32) {
    if zone == current.len() {
        states.push(CellState::new(current.clone()));
        return;
    }
    for n in 0..=remaining {
        current[zone] = n;
        fill(states, current, zone + 1, remaining - n);
    }
    current[zone] = 0;
}
