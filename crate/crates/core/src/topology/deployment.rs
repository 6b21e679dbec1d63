use serde::{Deserialize, Serialize};

use super::TopologyError;

/// Geometry of one cell: an AP and the disc of radius `radius` around it
/// that contains all of its stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeom {
    /// 1-based cell id.
    pub id: usize,
    /// AP coordinates in meters.
    pub ap_position: [f64; 2],
    /// Largest AP-to-STA distance in meters.
    pub radius: f64,
    /// Channel index in `1..=num_channels`.
    pub channel: u32,
    /// Nodes in the cell (AP plus STAs).
    pub node_count: u32,
}

/// Physical description of a multi-cell WLAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub cells: Vec<CellGeom>,
    /// Carrier-sensing range in meters.
    pub carrier_sense_range: f64,
    pub num_channels: u32,
}

impl Deployment {
    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.cells.is_empty() {
            return Err(TopologyError::Invalid("deployment has no cells".into()));
        }
        if self.cells.len() > crate::MAX_CELLS {
            return Err(TopologyError::TooManyCells(self.cells.len()));
        }
        if !(self.carrier_sense_range > 0.0) || !self.carrier_sense_range.is_finite() {
            return Err(TopologyError::Invalid(format!(
                "carrier_sense_range must be positive, got {}",
                self.carrier_sense_range
            )));
        }
        if self.num_channels == 0 {
            return Err(TopologyError::Invalid("num_channels must be at least 1".into()));
        }
        for (k, c) in self.cells.iter().enumerate() {
            if c.id != k + 1 {
                return Err(TopologyError::Invalid(format!(
                    "cells[{k}].id must be {}, got {}",
                    k + 1,
                    c.id
                )));
            }
            if c.channel < 1 || c.channel > self.num_channels {
                return Err(TopologyError::Invalid(format!(
                    "cells[{k}].channel = {} is outside 1..={}",
                    c.channel, self.num_channels
                )));
            }
            if !(c.radius >= 0.0) || !c.radius.is_finite() {
                return Err(TopologyError::Invalid(format!(
                    "cells[{k}].radius must be non-negative, got {}",
                    c.radius
                )));
            }
            if !c.ap_position.iter().all(|v| v.is_finite()) {
                return Err(TopologyError::Invalid(format!(
                    "cells[{k}].ap_position is not finite"
                )));
            }
            if c.node_count < 1 {
                return Err(TopologyError::Invalid(format!(
                    "cells[{k}].node_count must be at least 1"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn node_counts(&self) -> Vec<u32> {
        self.cells.iter().map(|c| c.node_count).collect()
    }

    pub(crate) fn ap_distance(&self, i: usize, j: usize) -> f64 {
        let [x1, y1] = self.cells[i].ap_position;
        let [x2, y2] = self.cells[j].ap_position;
        (x1 - x2).hypot(y1 - y2)
    }
}

/// How a pair of cells relates under the disc test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairRelation {
    Independent,
    CompletelyDependent,
    /// Some node pairs sense each other and some do not.
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairClass {
    /// 0-based cell indices, `a < b`.
    pub a: usize,
    pub b: usize,
    pub ap_distance: f64,
    pub relation: PairRelation,
}

/// Outcome of the pairwise-binary-dependence check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PbdReport {
    pub pairs: Vec<PairClass>,
}

impl PbdReport {
    pub fn passes(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn violations(&self) -> impl Iterator<Item = &PairClass> {
        self.pairs
            .iter()
            .filter(|p| p.relation == PairRelation::Violation)
    }
}

/// Classifies every cell pair with the disc bound: co-channel cells are
/// completely dependent when `d + R_i + R_j < R_cs`, independent when
/// `d - R_i - R_j >= R_cs`, and otherwise violate the condition. Cells on
/// different channels are always independent.
pub fn check_pbd(d: &Deployment) -> PbdReport {
    let rcs = d.carrier_sense_range;
    let mut pairs = Vec::new();
    for a in 0..d.cells.len() {
        for b in a + 1..d.cells.len() {
            let dist = d.ap_distance(a, b);
            let relation = if d.cells[a].channel != d.cells[b].channel {
                PairRelation::Independent
            } else {
                let spread = d.cells[a].radius + d.cells[b].radius;
                if dist + spread < rcs {
                    PairRelation::CompletelyDependent
                } else if dist - spread >= rcs {
                    PairRelation::Independent
                } else {
                    PairRelation::Violation
                }
            };
            pairs.push(PairClass {
                a,
                b,
                ap_distance: dist,
                relation,
            });
        }
    }
    PbdReport { pairs }
}
