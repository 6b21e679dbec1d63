//! Built-in example deployments. All use a 200 m sensing range, 10 m cells,
//! one channel and two nodes per cell.

use cellwlan::topology::{CellGeom, Deployment};

use crate::config::{CellSection, DeploymentSection};

pub const NAMES: [&str; 3] = ["two-cell", "three-chain", "three-clique"];

const RANGE_M: f64 = 200.0;
const RADIUS_M: f64 = 10.0;
const NODES: u32 = 2;

pub fn describe(name: &str) -> Option<&'static str> {
    match name {
        "two-cell" => Some("two co-channel cells 100 m apart (one contention domain)"),
        "three-chain" => Some("three cells on a line, 160 m spacing (path 1-2-3)"),
        "three-clique" => Some("three cells on a 100 m triangle (complete graph)"),
        _ => None,
    }
}

fn positions(name: &str) -> Option<Vec<[f64; 2]>> {
    match name {
        "two-cell" => Some(vec![[0.0, 0.0], [100.0, 0.0]]),
        "three-chain" => Some(vec![[0.0, 0.0], [160.0, 0.0], [320.0, 0.0]]),
        "three-clique" => Some(vec![[0.0, 0.0], [100.0, 0.0], [50.0, 50.0 * 3f64.sqrt()]]),
        _ => None,
    }
}

pub fn deployment(name: &str) -> Option<Deployment> {
    let cells = positions(name)?
        .into_iter()
        .enumerate()
        .map(|(k, p)| CellGeom {
            id: k + 1,
            ap_position: p,
            radius: RADIUS_M,
            channel: 1,
            node_count: NODES,
        })
        .collect();
    Some(Deployment {
        cells,
        carrier_sense_range: RANGE_M,
        num_channels: 1,
    })
}

/// The preset written out as an explicit deployment section.
pub fn explicit_section(name: &str) -> Option<DeploymentSection> {
    let dep = deployment(name)?;
    Some(DeploymentSection {
        carrier_sense_range_m: Some(dep.carrier_sense_range),
        num_channels: Some(dep.num_channels),
        cells: dep
            .cells
            .iter()
            .map(|c| CellSection {
                position_m: c.ap_position,
                radius_m: c.radius,
                channel: c.channel,
                nodes: c.node_count,
            })
            .collect(),
        ..Default::default()
    })
}
