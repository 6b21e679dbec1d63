//! Short TCP downloads as a network of processor-sharing queues, one per
//! cell, whose service rates depend on which cells currently hold flows.

mod analytic;
mod sim;

use serde::{Deserialize, Serialize};

use crate::topology::{mis_stats, ContentionGraph, TopologyError};
use crate::CellSet;

pub use analytic::{
    effective_rate_fixed_point, effective_rate_map, mean_delay_analytic, EffectiveRateConfig,
    MAX_EFFECTIVE_RATE_CELLS,
};
pub use sim::{simulate_flow_network, simulate_replication, ReplicationStats, SimConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{n} cells exceed the subset-sum limit of {max}")]
    TooManyCells { n: usize, max: usize },
    #[error("effective-rate iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServiceModel {
    /// Cell rate divided by one plus the number of busy neighbors.
    #[serde(rename = "model-1")]
    Model1,
    /// Cell rate scaled by the MIS share of the cell in the busy subgraph.
    #[serde(rename = "model-2")]
    Model2,
}

impl ServiceModel {
    pub fn name(self) -> &'static str {
        match self {
            ServiceModel::Model1 => "model-1",
            ServiceModel::Model2 => "model-2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    /// Flow arrival rate per cell, flows/s.
    pub arrival_rates: Vec<f64>,
    /// Mean flow size E[V], bits.
    pub mean_flow_size: f64,
    /// Application-level rate Θ of an isolated cell, bits/s.
    pub single_cell_rate: f64,
    pub service_model: ServiceModel,
}

impl FlowParams {
    pub fn validate(&self, cells: usize) -> Result<(), FlowError> {
        if self.arrival_rates.len() != cells {
            return Err(FlowError::InvalidParams(format!(
                "{} arrival rates for {} cells",
                self.arrival_rates.len(),
                cells
            )));
        }
        if let Some(k) = self
            .arrival_rates
            .iter()
            .position(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(FlowError::InvalidParams(format!(
                "arrival_rates[{k}] = {} must be finite and non-negative",
                self.arrival_rates[k]
            )));
        }
        if !(self.mean_flow_size > 0.0 && self.mean_flow_size.is_finite()) {
            return Err(FlowError::InvalidParams("mean_flow_size must be positive".into()));
        }
        if !(self.single_cell_rate > 0.0 && self.single_cell_rate.is_finite()) {
            return Err(FlowError::InvalidParams("single_cell_rate must be positive".into()));
        }
        Ok(())
    }

    /// Mean service requirement `E[V]/Θ` in seconds.
    pub fn mean_service_time(&self) -> f64 {
        self.mean_flow_size / self.single_cell_rate
    }

    /// Offered load `ν_i E[V] / Θ` of each cell.
    pub fn loads(&self) -> Vec<f64> {
        self.arrival_rates
            .iter()
            .map(|v| v * self.mean_service_time())
            .collect()
    }
}

/// Number of ongoing flows in each cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkState {
    pub counts: Vec<u64>,
}

impl NetworkState {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn nonempty(&self) -> CellSet {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &z)| z > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-cell rates `Θ / (1 + #busy neighbors)` for busy cells, 0 otherwise.
pub fn service_rates_model1(z: &NetworkState, g: &ContentionGraph, theta: f64) -> Vec<f64> {
    rates_model1_mask(z.nonempty(), g, theta)
}

fn rates_model1_mask(busy: CellSet, g: &ContentionGraph, theta: f64) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            if busy.contains(i) {
                theta / (1 + g.neighbors(i).intersection(busy).len()) as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Per-cell rates `Θ η_i(G_z) / η(G_z)` where `G_z` is the subgraph induced
/// by the busy cells; idle cells get 0.
pub fn service_rates_model2(
    z: &NetworkState,
    g: &ContentionGraph,
    theta: f64,
) -> Result<Vec<f64>, TopologyError> {
    rates_model2_mask(z.nonempty(), g, theta)
}

fn rates_model2_mask(
    busy: CellSet,
    g: &ContentionGraph,
    theta: f64,
) -> Result<Vec<f64>, TopologyError> {
    let mut rates = vec![0.0; g.len()];
    if busy.is_empty() {
        return Ok(rates);
    }
    let sub = g.restrict(busy)?;
    let share = mis_stats(&sub)?.fractions();
    for (k, i) in busy.iter().enumerate() {
        rates[i] = theta * share[k];
    }
    Ok(rates)
}

/// Rates of the given model for the set of busy cells.
pub fn service_rates(
    model: ServiceModel,
    busy: CellSet,
    g: &ContentionGraph,
    theta: f64,
) -> Result<Vec<f64>, TopologyError> {
    match model {
        ServiceModel::Model1 => Ok(rates_model1_mask(busy, g, theta)),
        ServiceModel::Model2 => rates_model2_mask(busy, g, theta),
    }
}

/// Mean delay per cell, with stability flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayResult {
    /// Seconds; absent for unstable cells and for cells that carried no
    /// measured flows.
    pub mean_delay: Vec<Option<f64>>,
    /// 95% half-width across replications, seconds.
    pub confidence_halfwidth: Vec<Option<f64>>,
    /// `x̂_i` of the analytic approximation.
    pub effective_rates: Option<Vec<f64>>,
    pub stable: Vec<bool>,
}
