use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{service_rates, DelayResult, FlowError, FlowParams};
use crate::rng::{stream, SimRng};
use crate::topology::ContentionGraph;
use crate::CellSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Arrivals per cell whose delays are measured, counting the warm-up.
    pub flows_per_cell: u64,
    /// Leading arrivals per cell that are simulated but not measured.
    pub warmup_flows: u64,
    pub replications: u32,
    /// A cell holding more flows than this is declared unstable.
    pub runaway_threshold: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            flows_per_cell: 10_000,
            warmup_flows: 1_000,
            replications: 20,
            runaway_threshold: 100_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.flows_per_cell <= self.warmup_flows {
            return Err(FlowError::InvalidParams(format!(
                "flows_per_cell ({}) must exceed warmup_flows ({})",
                self.flows_per_cell, self.warmup_flows
            )));
        }
        if self.replications == 0 {
            return Err(FlowError::InvalidParams("replications must be at least 1".into()));
        }
        if self.runaway_threshold == 0 {
            return Err(FlowError::InvalidParams("runaway_threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationStats {
    /// Mean delay of the measured flows of each cell, seconds.
    pub mean_delay: Vec<Option<f64>>,
    pub measured_flows: Vec<u64>,
    /// Cells that crossed the runaway threshold. The run stops at the first.
    pub runaway: Vec<bool>,
    pub events: u64,
    pub end_time: f64,
    /// Largest `|arrived - served - remaining|` work imbalance seen at any
    /// event, relative to the work arrived so far.
    pub max_conservation_error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    finish: f64,
    arrival: f64,
    measured: bool,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // reversed: BinaryHeap pops the smallest finish level first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .finish
            .total_cmp(&self.finish)
            .then(other.arrival.total_cmp(&self.arrival))
    }
}

/// Each cell is a processor-sharing queue. All flows in cell `i` are served
/// at `φ_i(z)/z_i`, so they share a common attained-service level `L_i`;
/// a flow of size `v` arriving when the level is `L` leaves when `L_i`
/// reaches `L + v`.
struct Cell {
    level: f64,
    flows: BinaryHeap<Pending>,
    finish_sum: f64,
    next_arrival: f64,
    arrivals: u64,
    delay_sum: f64,
    measured_done: u64,
}

/// Runs a single replication on random stream `replication` of `sc.seed`.
pub fn simulate_replication(
    g: &ContentionGraph,
    fp: &FlowParams,
    sc: &SimConfig,
    replication: u64,
) -> Result<ReplicationStats, FlowError> {
    fp.validate(g.len())?;
    sc.validate()?;
    let mut rng = stream(sc.seed, replication);
    run(g, fp, sc, &mut rng)
}

fn exp_sample(rng: &mut SimRng, rate: f64) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

fn run(
    g: &ContentionGraph,
    fp: &FlowParams,
    sc: &SimConfig,
    rng: &mut SimRng,
) -> Result<ReplicationStats, FlowError> {
    let n = g.len();
    let size_rate = 1.0 / fp.mean_flow_size;
    let mut cells: Vec<Cell> = fp
        .arrival_rates
        .iter()
        .map(|&nu| Cell {
            level: 0.0,
            flows: BinaryHeap::new(),
            finish_sum: 0.0,
            next_arrival: if nu > 0.0 { exp_sample(rng, nu) } else { f64::INFINITY },
            arrivals: 0,
            delay_sum: 0.0,
            measured_done: 0,
        })
        .collect();
    let per_cell_target = sc.flows_per_cell - sc.warmup_flows;
    let mut measured_left: u64 = fp
        .arrival_rates
        .iter()
        .filter(|&&nu| nu > 0.0)
        .count() as u64
        * per_cell_target;

    let mut cache: HashMap<u128, Vec<f64>> = HashMap::new();
    let mut t = 0.0;
    let mut events = 0u64;
    let mut arrived_work = 0.0;
    let mut served_work = 0.0;
    let mut max_err: f64 = 0.0;
    let mut runaway = vec![false; n];

    while measured_left > 0 {
        let busy: CellSet = (0..n).filter(|&i| !cells[i].flows.is_empty()).collect();
        let rates = match cache.get(&busy.bits()) {
            Some(r) => r,
            None => {
                let r = service_rates(fp.service_model, busy, g, fp.single_cell_rate)?;
                cache.entry(busy.bits()).or_insert(r)
            }
        };

        // next event: an arrival, or the head-of-line finish in some cell
        let mut next = f64::INFINITY;
        let mut who: Option<(usize, bool)> = None;
        for (i, c) in cells.iter().enumerate() {
            if c.next_arrival < next {
                next = c.next_arrival;
                who = Some((i, true));
            }
            if let Some(head) = c.flows.peek() {
                if rates[i] > 0.0 {
                    let z = c.flows.len() as f64;
                    let at = t + (head.finish - c.level) * z / rates[i];
                    if at < next {
                        next = at;
                        who = Some((i, false));
                    }
                }
            }
        }
        let Some((k, is_arrival)) = who else {
            // nothing can ever happen again: every pending flow is stuck
            for i in busy.iter() {
                runaway[i] = true;
            }
            break;
        };

        let dt = next - t;
        for (i, c) in cells.iter_mut().enumerate() {
            if !c.flows.is_empty() {
                c.level += dt * rates[i] / c.flows.len() as f64;
                served_work += dt * rates[i];
            }
        }
        t = next;
        events += 1;

        let c = &mut cells[k];
        if is_arrival {
            let size = exp_sample(rng, size_rate);
            let index = c.arrivals;
            c.arrivals += 1;
            let measured = index >= sc.warmup_flows && index < sc.flows_per_cell;
            let finish = c.level + size;
            c.flows.push(Pending {
                finish,
                arrival: t,
                measured,
            });
            c.finish_sum += finish;
            arrived_work += size;
            c.next_arrival = t + exp_sample(rng, fp.arrival_rates[k]);
            if c.flows.len() as u64 > sc.runaway_threshold {
                runaway[k] = true;
                break;
            }
        } else {
            let done = c.flows.pop().expect("departure from a busy cell");
            c.level = done.finish;
            c.finish_sum -= done.finish;
            if c.flows.is_empty() {
                c.level = 0.0;
                c.finish_sum = 0.0;
            }
            if done.measured {
                c.delay_sum += t - done.arrival;
                c.measured_done += 1;
                measured_left -= 1;
            }
        }

        let remaining: f64 = cells
            .iter()
            .map(|c| c.finish_sum - c.flows.len() as f64 * c.level)
            .sum();
        if arrived_work > 0.0 {
            let err = (arrived_work - served_work - remaining).abs() / arrived_work;
            max_err = max_err.max(err);
        }
    }

    Ok(ReplicationStats {
        mean_delay: cells
            .iter()
            .map(|c| (c.measured_done > 0).then(|| c.delay_sum / c.measured_done as f64))
            .collect(),
        measured_flows: cells.iter().map(|c| c.measured_done).collect(),
        runaway,
        events,
        end_time: t,
        max_conservation_error: max_err,
    })
}

/// Mean flow-transfer delay per cell over `sc.replications` independent
/// replications, with a 95% Student-t half-width.
pub fn simulate_flow_network(
    g: &ContentionGraph,
    fp: &FlowParams,
    sc: &SimConfig,
) -> Result<DelayResult, FlowError> {
    fp.validate(g.len())?;
    sc.validate()?;
    let n = g.len();
    let mut per_cell: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut stable = vec![true; n];
    for rep in 0..sc.replications as u64 {
        let mut rng = stream(sc.seed, rep);
        let r = run(g, fp, sc, &mut rng)?;
        let aborted = r.runaway.iter().any(|&b| b);
        for i in 0..n {
            if r.runaway[i] {
                stable[i] = false;
            }
            let complete = r.measured_flows[i] == sc.flows_per_cell - sc.warmup_flows;
            if let (Some(d), false) = (r.mean_delay[i], aborted && !complete) {
                per_cell[i].push(d);
            }
        }
    }
    let mut mean_delay = vec![None; n];
    let mut halfwidth = vec![None; n];
    for i in 0..n {
        if !stable[i] || per_cell[i].is_empty() {
            continue;
        }
        let (m, h) = mean_and_halfwidth(&per_cell[i]);
        mean_delay[i] = Some(m);
        halfwidth[i] = h;
    }
    Ok(DelayResult {
        mean_delay,
        confidence_halfwidth: halfwidth,
        effective_rates: None,
        stable,
    })
}

/// Sample mean and 95% Student-t half-width; the latter needs two samples.
pub(crate) fn mean_and_halfwidth(xs: &[f64]) -> (f64, Option<f64>) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let t = StudentsT::new(0.0, 1.0, r - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, Some(t * (var / r).sqrt()))
}
