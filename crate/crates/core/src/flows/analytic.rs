use serde::{Deserialize, Serialize};

use super::{DelayResult, FlowError, FlowParams};
use crate::topology::{mis_stats, ContentionGraph};
use crate::CellSet;

/// Largest network for which the subset sum is attempted.
pub const MAX_EFFECTIVE_RATE_CELLS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveRateConfig {
    pub tolerance: f64,
    pub damping: f64,
    pub max_iterations: usize,
}

impl Default for EffectiveRateConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            damping: 0.5,
            max_iterations: 10_000,
        }
    }
}

/// `η_i/η` of `G[M]` for every vertex mask `M`, indexed by `M` and then by
/// vertex. Entries for vertices outside `M` are unused.
struct MisShareTable {
    n: usize,
    share: Vec<f64>,
}

impl MisShareTable {
    fn new(g: &ContentionGraph) -> Result<Self, FlowError> {
        let n = g.len();
        let mut share = vec![0.0; n << n];
        for mask in 1usize..(1 << n) {
            let set = CellSet::from_bits(mask as u128);
            let f = mis_stats(&g.restrict(set)?)?.fractions();
            for (k, i) in set.iter().enumerate() {
                share[mask * n + i] = f[k];
            }
        }
        Ok(Self { n, share })
    }

    fn get(&self, mask: usize, i: usize) -> f64 {
        self.share[mask * self.n + i]
    }
}

/// Probability that each cell is nonempty given effective rates `x̂`:
/// `min{1, ν E[V] / (x̂ Θ)}`, with an infinite load when `x̂ = 0`.
fn busy_probability(fp: &FlowParams, xhat: &[f64]) -> Vec<f64> {
    fp.arrival_rates
        .iter()
        .zip(xhat)
        .map(|(&nu, &x)| {
            if nu == 0.0 {
                0.0
            } else if x <= 0.0 {
                1.0
            } else {
                (nu * fp.mean_flow_size / (x * fp.single_cell_rate)).min(1.0)
            }
        })
        .collect()
}

fn apply_map(table: &MisShareTable, fp: &FlowParams, xhat: &[f64]) -> Vec<f64> {
    let n = table.n;
    let p = busy_probability(fp, xhat);
    (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut total = 0.0;
            for bits in 0usize..(1 << others.len()) {
                let mut weight = 1.0;
                let mut mask = 1usize << i;
                for (b, &j) in others.iter().enumerate() {
                    if bits >> b & 1 == 1 {
                        weight *= p[j];
                        mask |= 1 << j;
                    } else {
                        weight *= (1.0 - p[j]).max(0.0);
                    }
                    if weight == 0.0 {
                        break;
                    }
                }
                if weight > 0.0 {
                    total += weight * table.get(mask, i);
                }
            }
            total
        })
        .collect()
}

fn check_size(g: &ContentionGraph) -> Result<(), FlowError> {
    if g.len() > MAX_EFFECTIVE_RATE_CELLS {
        return Err(FlowError::TooManyCells {
            n: g.len(),
            max: MAX_EFFECTIVE_RATE_CELLS,
        });
    }
    Ok(())
}

/// One application of the effective-rate map: for each cell, the average of
/// its MIS share over the random set of other busy cells, each cell taken
/// busy independently with probability `min{1, ν E[V]/(x̂ Θ)}`.
pub fn effective_rate_map(
    g: &ContentionGraph,
    fp: &FlowParams,
    xhat: &[f64],
) -> Result<Vec<f64>, FlowError> {
    fp.validate(g.len())?;
    check_size(g)?;
    if xhat.len() != g.len() {
        return Err(FlowError::InvalidParams("one effective rate per cell".into()));
    }
    Ok(apply_map(&MisShareTable::new(g)?, fp, xhat))
}

/// Damped iteration of [`effective_rate_map`] starting from `x̂ = 1`.
pub fn effective_rate_fixed_point(
    g: &ContentionGraph,
    fp: &FlowParams,
    cfg: &EffectiveRateConfig,
) -> Result<Vec<f64>, FlowError> {
    fp.validate(g.len())?;
    check_size(g)?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) || !(cfg.tolerance > 0.0) {
        return Err(FlowError::InvalidParams(
            "damping must lie in (0, 1] and tolerance must be positive".into(),
        ));
    }
    let table = MisShareTable::new(g)?;
    let mut x = vec![1.0; g.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..=cfg.max_iterations {
        let next = apply_map(&table, fp, &x);
        residual = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual < cfg.tolerance {
            return Ok(next);
        }
        for (xi, ni) in x.iter_mut().zip(&next) {
            *xi = (1.0 - cfg.damping) * *xi + cfg.damping * ni;
        }
    }
    Err(FlowError::NonConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// `E[D]_i = (E[V]/(x̂_i Θ)) / (1 - ν_i E[V]/(x̂_i Θ))` where the cell is
/// stable, i.e. `ν_i E[V] < x̂_i Θ`.
pub fn mean_delay_analytic(xhat: &[f64], fp: &FlowParams) -> DelayResult {
    let mut mean_delay = Vec::with_capacity(xhat.len());
    let mut stable = Vec::with_capacity(xhat.len());
    for (&x, &nu) in xhat.iter().zip(&fp.arrival_rates) {
        let capacity = x * fp.single_cell_rate;
        let ok = capacity > 0.0 && nu * fp.mean_flow_size < capacity;
        stable.push(ok);
        mean_delay.push(ok.then(|| {
            let service = fp.mean_flow_size / capacity;
            service / (1.0 - nu * service)
        }));
    }
    DelayResult {
        confidence_halfwidth: vec![None; xhat.len()],
        mean_delay,
        effective_rates: Some(xhat.to_vec()),
        stable,
    }
}
