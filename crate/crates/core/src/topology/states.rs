use std::collections::HashMap;

use serde::Serialize;

use super::{ContentionGraph, TopologyError};
use crate::CellSet;

/// Default ceiling on the number of independent sets we are willing to
/// enumerate.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// One CTMC state: the transmitting cells and the induced split of the
/// remaining cells into blocked and backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct State {
    pub active: CellSet,
    pub blocked: CellSet,
    pub backoff: CellSet,
}

/// All independent sets of a contention graph, in lexicographic order of
/// their sorted member lists. The empty state is always at index 0.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_cells: usize,
    states: Vec<State>,
    index: HashMap<CellSet, usize>,
}

impl StateSpace {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &State {
        &self.states[k]
    }

    /// Index of the empty state.
    pub fn empty_index(&self) -> usize {
        0
    }

    pub fn index_of(&self, active: CellSet) -> Option<usize> {
        self.index.get(&active).copied()
    }
}

/// Splits the cells not in `active` into those blocked by a transmitting
/// neighbor and those free to count down.
pub fn partition_state(g: &ContentionGraph, active: CellSet) -> Result<State, TopologyError> {
    if let Some(bad) = active.difference(g.all_cells()).first() {
        return Err(TopologyError::CellOutOfRange {
            index: bad,
            n: g.len(),
        });
    }
    if !g.is_independent(active) {
        return Err(TopologyError::NotIndependent(active.to_vec()));
    }
    Ok(partition_unchecked(g, active))
}

fn partition_unchecked(g: &ContentionGraph, active: CellSet) -> State {
    let blocked = g.neighborhood(active).difference(active);
    let backoff = g.all_cells().difference(active).difference(blocked);
    State {
        active,
        blocked,
        backoff,
    }
}

/// Calls `visit` on every independent set of `g` in lexicographic order.
/// Fails once more than `cap` sets have been produced.
pub fn for_each_independent_set<F>(
    g: &ContentionGraph,
    cap: usize,
    mut visit: F,
) -> Result<usize, TopologyError>
where
    F: FnMut(CellSet),
{
    fn recurse<F: FnMut(CellSet)>(
        g: &ContentionGraph,
        current: CellSet,
        candidates: CellSet,
        count: &mut usize,
        cap: usize,
        visit: &mut F,
    ) -> Result<(), TopologyError> {
        *count += 1;
        if *count > cap {
            return Err(TopologyError::StateSpaceTooLarge { cap });
        }
        visit(current);
        // branch on the lowest remaining candidate: include it here, then
        // exclude it by moving on to the next one
        let mut rest = candidates;
        while let Some(v) = rest.first() {
            rest.remove(v);
            let next = rest.difference(g.neighbors(v));
            recurse(g, current.with(v), next, count, cap, visit)?;
        }
        Ok(())
    }

    let mut count = 0;
    recurse(g, CellSet::EMPTY, g.all_cells(), &mut count, cap, &mut visit)?;
    Ok(count)
}

pub fn enumerate_independent_sets(g: &ContentionGraph) -> Result<StateSpace, TopologyError> {
    enumerate_independent_sets_capped(g, DEFAULT_STATE_CAP)
}

pub fn enumerate_independent_sets_capped(
    g: &ContentionGraph,
    cap: usize,
) -> Result<StateSpace, TopologyError> {
    let mut states = Vec::new();
    for_each_independent_set(g, cap, |a| states.push(partition_unchecked(g, a)))?;
    let index = states
        .iter()
        .enumerate()
        .map(|(k, s)| (s.active, k))
        .collect();
    Ok(StateSpace {
        n_cells: g.len(),
        states,
        index,
    })
}

/// Maximum-independent-set statistics of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MisStats {
    /// Independence number.
    pub alpha: usize,
    /// Number of maximum independent sets.
    pub eta: u64,
    /// Number of maximum independent sets containing each cell.
    pub eta_per_cell: Vec<u64>,
}

impl MisStats {
    /// `eta_i / eta` for each cell.
    pub fn fractions(&self) -> Vec<f64> {
        self.eta_per_cell
            .iter()
            .map(|&e| e as f64 / self.eta as f64)
            .collect()
    }
}

pub fn mis_stats(g: &ContentionGraph) -> Result<MisStats, TopologyError> {
    mis_stats_capped(g, DEFAULT_STATE_CAP)
}

pub fn mis_stats_capped(g: &ContentionGraph, cap: usize) -> Result<MisStats, TopologyError> {
    let mut alpha = 0;
    let mut maxima: Vec<CellSet> = Vec::new();
    for_each_independent_set(g, cap, |a| {
        let k = a.len();
        if k > alpha {
            alpha = k;
            maxima.clear();
        }
        if k == alpha {
            maxima.push(a);
        }
    })?;
    let mut eta_per_cell = vec![0u64; g.len()];
    for m in &maxima {
        for i in m.iter() {
            eta_per_cell[i] += 1;
        }
    }
    Ok(MisStats {
        alpha,
        eta: maxima.len() as u64,
        eta_per_cell,
    })
}
