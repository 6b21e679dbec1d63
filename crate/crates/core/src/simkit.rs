//! Monte-Carlo cross-checks for the analytic model.
//!
//! [`simulate_ctmc`] runs the cell-level Markov chain directly and measures
//! state occupancy. [`simulate_slotted`] is a slot-synchronous engine with
//! per-node Bernoulli attempts, immediate blocking of neighbors and whole-slot
//! frame holds; it counts attempts and collisions of one tagged node per
//! cell, which is what the per-cell collision probability describes.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::topology::{ContentionGraph, StateSpace};
use crate::CellSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcParams {
    pub seed: u64,
    /// Number of jumps to simulate.
    pub transitions: u64,
}

impl Default for CtmcParams {
    fn default() -> Self {
        Self {
            seed: 1,
            transitions: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtmcRun {
    pub seed: u64,
    pub transitions: u64,
    /// Fraction of time spent in each state, aligned with the state space.
    pub empirical_pi: Vec<f64>,
    /// Fraction of time each cell was not blocked.
    pub empirical_x: Vec<f64>,
}

/// Simulates the jump chain in which, from state `A`, each backoff cell `j`
/// activates at rate `λ_j` and each active cell `i` deactivates at rate `μ_i`.
pub fn simulate_ctmc(
    ss: &StateSpace,
    lambda: &[f64],
    mu: &[f64],
    params: &CtmcParams,
) -> Result<CtmcRun, SimError> {
    let n = ss.n_cells();
    if lambda.len() != n || mu.len() != n {
        return Err(SimError::InvalidInput("one rate pair per cell".into()));
    }
    if lambda.iter().chain(mu).any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(SimError::InvalidInput("rates must be positive and finite".into()));
    }

    // per state: cumulative rates and target indices
    let table: Vec<(Vec<f64>, Vec<usize>)> = ss
        .states()
        .iter()
        .map(|s| {
            let mut cum = Vec::new();
            let mut to = Vec::new();
            let mut acc = 0.0;
            for j in s.backoff.iter() {
                acc += lambda[j];
                cum.push(acc);
                to.push(ss.index_of(s.active.with(j)).expect("activation stays independent"));
            }
            for i in s.active.iter() {
                acc += mu[i];
                cum.push(acc);
                to.push(ss.index_of(s.active.without(i)).expect("subsets are independent"));
            }
            (cum, to)
        })
        .collect();

    let mut rng = stream(params.seed, 0);
    let mut occupancy = vec![0.0; ss.len()];
    let mut k = ss.empty_index();
    for _ in 0..params.transitions {
        let (cum, to) = &table[k];
        let total = *cum.last().expect("every state has a transition");
        occupancy[k] += Exp::new(total).expect("positive rate").sample(&mut rng);
        let u = rng.random::<f64>() * total;
        let pick = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        k = to[pick];
    }

    let horizon: f64 = occupancy.iter().sum();
    let empirical_pi: Vec<f64> = occupancy.iter().map(|t| t / horizon).collect();
    let empirical_x = crate::multicell::unblocked_fraction(ss, &empirical_pi);
    Ok(CtmcRun {
        seed: params.seed,
        transitions: params.transitions,
        empirical_pi,
        empirical_x,
    })
}

/// `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Whole slots needed to cover `duration`.
pub fn slots_for(duration: f64, slot_time: f64) -> u64 {
    let r = duration / slot_time;
    // guard against representation error pushing an exact multiple up
    let rounded = r.round();
    if (r - rounded).abs() < 1e-9 {
        rounded as u64
    } else {
        r.ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlottedParams {
    pub seed: u64,
    pub horizon_slots: u64,
    /// Seconds per slot, used only to convert counts into rates.
    pub slot_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlottedRun {
    pub seed: u64,
    pub horizon_slots: u64,
    /// Attempts of the tagged node of each cell.
    pub attempts: Vec<u64>,
    /// Attempts of the tagged node that collided.
    pub collisions: Vec<u64>,
    /// Successful frame exchanges of each cell (any node).
    pub successes: Vec<u64>,
    /// Slots each cell spent in backoff.
    pub backoff_slots: Vec<u64>,
    /// Slots each cell was not blocked.
    pub unblocked_slots: Vec<u64>,
    /// Backoff slots of each cell, split by the set of transmitting cells.
    pub backoff_by_state: Vec<BTreeMap<CellSet, u64>>,
    /// `collisions / attempts`, absent when the tagged node never attempted.
    pub empirical_gamma: Vec<Option<f64>>,
    /// Successful exchanges per second.
    pub empirical_throughput_pkts: Vec<f64>,
    /// Slots in which a successful transmission overlapped a neighbor's
    /// transmission. Always zero unless the engine is broken.
    pub exclusion_violations: u64,
}

#[derive(Clone, Copy)]
struct Hold {
    remaining: u64,
    success: bool,
}

/// Slot-synchronous simulation of the cell abstraction.
///
/// In every slot each backoff cell lets each of its nodes attempt with
/// probability `β_i`. A cell with at least one attempt starts a frame
/// exchange that occupies `ts_slots` slots if exactly one of its nodes
/// attempted and no neighboring cell attempted in the same slot, and
/// `tc_slots` otherwise. Neighbors of a transmitting cell are blocked for
/// the whole hold and rejoin backoff in the slot after it ends.
pub fn simulate_slotted(
    g: &ContentionGraph,
    node_counts: &[u32],
    beta: &[f64],
    ts_slots: u64,
    tc_slots: u64,
    params: &SlottedParams,
) -> Result<SlottedRun, SimError> {
    let n = g.len();
    if node_counts.len() != n || beta.len() != n {
        return Err(SimError::InvalidInput("one node count and β per cell".into()));
    }
    if node_counts.contains(&0) {
        return Err(SimError::InvalidInput("every cell needs a node".into()));
    }
    if beta.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
        return Err(SimError::InvalidInput("β must lie in (0, 1)".into()));
    }
    if ts_slots == 0 || tc_slots == 0 {
        return Err(SimError::InvalidInput("holds must last at least one slot".into()));
    }
    if !(params.slot_time > 0.0) {
        return Err(SimError::InvalidInput("slot_time must be positive".into()));
    }

    let others: Vec<Binomial> = (0..n)
        .map(|i| Binomial::new((node_counts[i] - 1) as u64, beta[i]).expect("valid binomial"))
        .collect();
    let mut rng = stream(params.seed, 0);
    let mut hold: Vec<Option<Hold>> = vec![None; n];

    let mut attempts = vec![0u64; n];
    let mut collisions = vec![0u64; n];
    let mut successes = vec![0u64; n];
    let mut backoff_slots = vec![0u64; n];
    let mut unblocked_slots = vec![0u64; n];
    let mut backoff_by_state: Vec<BTreeMap<CellSet, u64>> = vec![BTreeMap::new(); n];
    let mut violations = 0u64;

    let mut tagged = vec![false; n];
    let mut count = vec![0u64; n];
    for _ in 0..params.horizon_slots {
        let transmitting: CellSet = (0..n).filter(|&i| hold[i].is_some()).collect();
        let blocked = g.neighborhood(transmitting).difference(transmitting);
        let backoff = g.all_cells().difference(transmitting).difference(blocked);

        let mut attempting = CellSet::EMPTY;
        for i in backoff.iter() {
            backoff_slots[i] += 1;
            *backoff_by_state[i].entry(transmitting).or_insert(0) += 1;
            tagged[i] = rng.random::<f64>() < beta[i];
            count[i] = tagged[i] as u64 + others[i].sample(&mut rng);
            if count[i] > 0 {
                attempting.insert(i);
            }
        }
        for i in attempting.iter() {
            let clash = count[i] > 1 || !g.neighbors(i).is_disjoint(attempting);
            if tagged[i] {
                attempts[i] += 1;
                if clash {
                    collisions[i] += 1;
                }
            }
            if !clash {
                successes[i] += 1;
            }
            hold[i] = Some(Hold {
                remaining: if clash { tc_slots } else { ts_slots },
                success: !clash,
            });
        }

        let now = transmitting.union(attempting);
        for i in now.iter() {
            if hold[i].is_some_and(|h| h.success) && !g.neighbors(i).is_disjoint(now) {
                violations += 1;
            }
        }
        for i in g.all_cells().difference(g.neighborhood(now).difference(now)).iter() {
            unblocked_slots[i] += 1;
        }
        for h in hold.iter_mut() {
            if let Some(x) = h {
                x.remaining -= 1;
                if x.remaining == 0 {
                    *h = None;
                }
            }
        }
    }

    let seconds = params.horizon_slots as f64 * params.slot_time;
    Ok(SlottedRun {
        seed: params.seed,
        horizon_slots: params.horizon_slots,
        empirical_gamma: attempts
            .iter()
            .zip(&collisions)
            .map(|(&a, &c)| (a > 0).then(|| c as f64 / a as f64))
            .collect(),
        empirical_throughput_pkts: successes.iter().map(|&s| s as f64 / seconds).collect(),
        attempts,
        collisions,
        successes,
        backoff_slots,
        unblocked_slots,
        backoff_by_state,
        exclusion_violations: violations,
    })
}
