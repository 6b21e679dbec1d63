//! TOML analysis configuration.
//!
//! Times are given in microseconds, sizes in bytes and rates in bits/s;
//! everything is converted to seconds and bits on the way into the library.

use std::path::Path;

use cellwlan::dcf::{mean_backoffs, AccessMode, BackoffParams, MacPhyParams};
use cellwlan::flows::{EffectiveRateConfig, ServiceModel, SimConfig};
use cellwlan::multicell::{FixedPointConfig, InitialBeta, TcpSizes};
use cellwlan::topology::{build_contention_graph, CellGeom, ContentionGraph, Deployment};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::presets;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Base seed for every random stream of the run.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub deployment: DeploymentSection,
    #[serde(default)]
    pub mac_phy: MacPhySection,
    #[serde(default)]
    pub backoff: BackoffSection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_sense_range_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_channels: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellSection>,
    /// Contention graph given directly, bypassing geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomGraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    pub position_m: [f64; 2],
    pub radius_m: f64,
    #[serde(default = "one")]
    pub channel: u32,
    #[serde(default = "one")]
    pub nodes: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomGraph {
    pub cells: usize,
    /// 1-based cell pairs.
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacPhySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_time_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sifs_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difs_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phy_overhead_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac_header_bytes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ack_bytes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_bytes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_mode: Option<AccessMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rts_bytes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cts_bytes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackoffSection {
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
}

impl Default for BackoffSection {
    fn default() -> Self {
        Self {
            cw_min: 32,
            cw_max: 1024,
            retry_limit: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficMode {
    Saturated,
    TcpLong,
    TcpShort,
}

impl TrafficMode {
    pub fn name(self) -> &'static str {
        match self {
            TrafficMode::Saturated => "saturated",
            TrafficMode::TcpLong => "tcp-long",
            TrafficMode::TcpShort => "tcp-short",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub mode: TrafficMode,
    /// Saturated nodes per cell; defaults to the deployment's node counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_counts: Option<Vec<u32>>,
    /// MAC payload of a TCP data segment, IP and TCP headers included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcp_data_bytes: Option<f64>,
    /// MAC payload of a TCP ACK.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcp_ack_bytes: Option<f64>,
    /// Application bytes carried by one TCP data segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_data_bytes: Option<f64>,
    /// Flow arrival rate per cell, flows/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rates: Option<Vec<f64>>,
    /// Mean service requirements `E[V]/Θ` to evaluate, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_service_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_models: Option<Vec<ServiceModel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: f64,
    pub damping: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub state_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_beta: Option<Vec<f64>>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            tolerance: d.tolerance,
            damping: d.damping,
            max_iterations: d.max_iterations,
            restarts: d.restarts,
            state_cap: d.state_cap,
            initial_beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub flows_per_cell: u64,
    pub warmup_flows: u64,
    pub replications: u32,
    pub runaway_threshold: u64,
    /// Slots for the slotted cross-check of `saturation`; 0 skips it.
    pub slotted_slots: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            flows_per_cell: d.flows_per_cell,
            warmup_flows: d.warmup_flows,
            replications: d.replications,
            runaway_threshold: d.runaway_threshold,
            slotted_slots: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub payload_bytes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// One CSV per table plus the bundle document.
    Csv,
    /// The bundle document only.
    Doc,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the config as JSON with sorted keys.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn require_mode(&self, verb: &str, allowed: &[TrafficMode]) -> Result<(), CliError> {
        if allowed.contains(&self.traffic.mode) {
            return Ok(());
        }
        let names: Vec<&str> = allowed.iter().map(|m| m.name()).collect();
        Err(invalid(format!(
            "traffic.mode = \"{}\" but `{verb}` needs {}",
            self.traffic.mode.name(),
            names.join(" or ")
        )))
    }
}

/// The network as the library sees it.
pub struct Network {
    pub graph: ContentionGraph,
    /// Present when the graph came from geometry.
    pub deployment: Option<Deployment>,
}

impl DeploymentSection {
    pub fn resolve(&self) -> Result<Network, CliError> {
        let sources = [self.preset.is_some(), !self.cells.is_empty(), self.custom.is_some()];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(invalid(
                "deployment needs exactly one of `preset`, `cells` or `custom`",
            ));
        }
        if let Some(custom) = &self.custom {
            if self.carrier_sense_range_m.is_some() || self.num_channels.is_some() {
                return Err(invalid(
                    "deployment.custom cannot be combined with geometric fields",
                ));
            }
            let edges = custom
                .edges
                .iter()
                .enumerate()
                .map(|(k, &[a, b])| {
                    if a == 0 || b == 0 || a > custom.cells || b > custom.cells {
                        Err(invalid(format!(
                            "deployment.custom.edges[{k}] = [{a}, {b}] names a cell outside 1..={}",
                            custom.cells
                        )))
                    } else {
                        Ok((a - 1, b - 1))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let graph = ContentionGraph::new(custom.cells, &edges)
                .map_err(|e| invalid(format!("deployment.custom: {e}")))?;
            return Ok(Network {
                graph,
                deployment: None,
            });
        }
        let dep = if let Some(name) = &self.preset {
            if self.carrier_sense_range_m.is_some() || self.num_channels.is_some() {
                return Err(invalid(
                    "deployment.preset cannot be combined with geometric fields",
                ));
            }
            presets::deployment(name).ok_or_else(|| {
                invalid(format!(
                    "deployment.preset = \"{name}\" is not a known preset ({})",
                    presets::NAMES.join(", ")
                ))
            })?
        } else {
            Deployment {
                cells: self
                    .cells
                    .iter()
                    .enumerate()
                    .map(|(k, c)| CellGeom {
                        id: k + 1,
                        ap_position: c.position_m,
                        radius: c.radius_m,
                        channel: c.channel,
                        node_count: c.nodes,
                    })
                    .collect(),
                carrier_sense_range: self.carrier_sense_range_m.ok_or_else(|| {
                    invalid("deployment.carrier_sense_range_m is required with explicit cells")
                })?,
                num_channels: self.num_channels.unwrap_or(1),
            }
        };
        let graph =
            build_contention_graph(&dep).map_err(|e| invalid(format!("deployment: {e}")))?;
        Ok(Network {
            graph,
            deployment: Some(dep),
        })
    }
}

impl MacPhySection {
    pub fn resolve(&self) -> Result<MacPhyParams, CliError> {
        let mut p = match self.preset.as_deref() {
            None | Some("dot11b-11mbps") => MacPhyParams::dot11b_11mbps(),
            Some(other) => {
                return Err(invalid(format!(
                    "mac_phy.preset = \"{other}\" is not a known preset (dot11b-11mbps)"
                )))
            }
        };
        let us = 1e-6;
        let bits = 8.0;
        if let Some(v) = self.slot_time_us {
            p.slot_time = v * us;
        }
        if let Some(v) = self.sifs_us {
            p.sifs = v * us;
        }
        if let Some(v) = self.difs_us {
            p.difs = v * us;
        }
        if let Some(v) = self.phy_overhead_us {
            p.phy_overhead = v * us;
        }
        if let Some(v) = self.mac_header_bytes {
            p.mac_header_size = v * bits;
        }
        if let Some(v) = self.data_rate_bps {
            p.data_rate = v;
        }
        if let Some(v) = self.control_rate_bps {
            p.control_rate = v;
        }
        if let Some(v) = self.ack_bytes {
            p.ack_size = v * bits;
        }
        if let Some(v) = self.payload_bytes {
            p.payload_size = v * bits;
        }
        if let Some(v) = self.access_mode {
            p.access_mode = v;
        }
        if let Some(v) = self.rts_bytes {
            p.rts_size = v * bits;
        }
        if let Some(v) = self.cts_bytes {
            p.cts_size = v * bits;
        }
        p.validate().map_err(|e| invalid(format!("mac_phy: {e}")))?;
        Ok(p)
    }
}

impl BackoffSection {
    pub fn resolve(&self) -> Result<BackoffParams, CliError> {
        mean_backoffs(self.cw_min, self.cw_max, self.retry_limit)
            .map_err(|e| invalid(format!("backoff: {e}")))
    }
}

impl SolverSection {
    pub fn resolve(&self, seed: u64) -> Result<FixedPointConfig, CliError> {
        let cfg = FixedPointConfig {
            tolerance: self.tolerance,
            damping: self.damping,
            max_iterations: self.max_iterations,
            initial_beta: match &self.initial_beta {
                Some(v) => InitialBeta::PerCell(v.clone()),
                None => InitialBeta::NoCollision,
            },
            restarts: self.restarts,
            seed,
            state_cap: self.state_cap,
        };
        cfg.validate().map_err(|e| invalid(format!("solver: {e}")))?;
        Ok(cfg)
    }

    pub fn effective_rate(&self) -> EffectiveRateConfig {
        EffectiveRateConfig {
            tolerance: self.tolerance.min(EffectiveRateConfig::default().tolerance),
            damping: self.damping,
            max_iterations: self.max_iterations.max(EffectiveRateConfig::default().max_iterations),
        }
    }
}

impl SimSection {
    pub fn resolve(&self, seed: u64) -> Result<SimConfig, CliError> {
        let sc = SimConfig {
            seed,
            flows_per_cell: self.flows_per_cell,
            warmup_flows: self.warmup_flows,
            replications: self.replications,
            runaway_threshold: self.runaway_threshold,
        };
        sc.validate().map_err(|e| invalid(format!("sim: {e}")))?;
        Ok(sc)
    }
}

impl TrafficSection {
    pub fn node_counts(&self, net: &Network) -> Result<Vec<u32>, CliError> {
        let n = net.graph.len();
        let counts = match (&self.node_counts, &net.deployment) {
            (Some(v), _) => v.clone(),
            (None, Some(dep)) => dep.node_counts(),
            (None, None) => {
                return Err(invalid(
                    "traffic.node_counts is required with a custom deployment",
                ))
            }
        };
        if counts.len() != n {
            return Err(invalid(format!(
                "traffic.node_counts has {} entries for {n} cells",
                counts.len()
            )));
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(invalid(format!("traffic.node_counts[{k}] must be at least 1")));
        }
        Ok(counts)
    }

    pub fn tcp_sizes(&self) -> Result<TcpSizes, CliError> {
        let data = self
            .tcp_data_bytes
            .ok_or_else(|| invalid("traffic.tcp_data_bytes is required for TCP traffic"))?;
        let ack = self
            .tcp_ack_bytes
            .ok_or_else(|| invalid("traffic.tcp_ack_bytes is required for TCP traffic"))?;
        if !(data > 0.0 && ack > 0.0) {
            return Err(invalid("traffic.tcp_data_bytes and tcp_ack_bytes must be positive"));
        }
        Ok(TcpSizes {
            data: data * 8.0,
            ack: ack * 8.0,
        })
    }

    pub fn app_data_bits(&self) -> Result<f64, CliError> {
        let v = self
            .app_data_bytes
            .ok_or_else(|| invalid("traffic.app_data_bytes is required for tcp-short"))?;
        if !(v > 0.0) {
            return Err(invalid("traffic.app_data_bytes must be positive"));
        }
        Ok(v * 8.0)
    }

    pub fn arrival_rates(&self, n: usize) -> Result<Vec<f64>, CliError> {
        let v = self
            .arrival_rates
            .clone()
            .ok_or_else(|| invalid("traffic.arrival_rates is required for tcp-short"))?;
        if v.len() != n {
            return Err(invalid(format!(
                "traffic.arrival_rates has {} entries for {n} cells",
                v.len()
            )));
        }
        if let Some(k) = v.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(invalid(format!(
                "traffic.arrival_rates[{k}] must be finite and non-negative"
            )));
        }
        Ok(v)
    }

    pub fn mean_service_s(&self) -> Result<Vec<f64>, CliError> {
        let v = self
            .mean_service_s
            .clone()
            .ok_or_else(|| invalid("traffic.mean_service_s is required for tcp-short"))?;
        if v.is_empty() {
            return Err(invalid("traffic.mean_service_s must not be empty"));
        }
        if let Some(k) = v.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid(format!("traffic.mean_service_s[{k}] must be positive")));
        }
        Ok(v)
    }

    pub fn service_models(&self) -> Vec<ServiceModel> {
        self.service_models
            .clone()
            .unwrap_or_else(|| vec![ServiceModel::Model2])
    }
}
