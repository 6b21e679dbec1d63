//! Deployment geometry, the pairwise-binary-dependence check, and the
//! combinatorics of the cell-level contention graph.

mod deployment;
mod graph;
mod states;

pub use deployment::{check_pbd, CellGeom, Deployment, PairClass, PairRelation, PbdReport};
pub use graph::{build_contention_graph, ContentionGraph};
pub use states::{
    enumerate_independent_sets, enumerate_independent_sets_capped, for_each_independent_set,
    mis_stats, mis_stats_capped, partition_state, MisStats, State, StateSpace,
    DEFAULT_STATE_CAP,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("invalid deployment: {0}")]
    Invalid(String),
    #[error("{0} cells exceed the supported maximum of {max}", max = crate::MAX_CELLS)]
    TooManyCells(usize),
    #[error("cell index {index} out of range for a graph with {n} cells")]
    CellOutOfRange { index: usize, n: usize },
    #[error("cells {0:?} are not an independent set")]
    NotIndependent(Vec<usize>),
    #[error("state space exceeds the enumeration cap of {cap} independent sets")]
    StateSpaceTooLarge { cap: usize },
    #[error("adjacency list: {0}")]
    Parse(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    const RCS: f64 = 100.0;

    fn cell(id: usize, x: f64, y: f64, radius: f64, channel: u32) -> CellGeom {
        CellGeom {
            id,
            ap_position: [x, y],
            radius,
            channel,
            node_count: 2,
        }
    }

    fn deployment(cells: Vec<CellGeom>, m: u32) -> Deployment {
        Deployment {
            cells,
            carrier_sense_range: RCS,
            num_channels: m,
        }
    }

    #[test]
    fn co_channel_pair_within_range_is_an_edge() {
        let d = deployment(vec![cell(1, 0., 0., 5., 1), cell(2, 50., 0., 5., 1)], 1);
        let g = build_contention_graph(&d).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
    }

    #[test]
    fn different_channels_never_connect() {
        let d = deployment(vec![cell(1, 0., 0., 5., 1), cell(2, 50., 0., 5., 2)], 2);
        assert_eq!(build_contention_graph(&d).unwrap().edge_count(), 0);
    }

    #[test]
    fn linear_layout_gives_path() {
        let d = deployment(
            vec![
                cell(1, 0., 0., 5., 1),
                cell(2, 80., 0., 5., 1),
                cell(3, 160., 0., 5., 1),
            ],
            1,
        );
        assert_eq!(build_contention_graph(&d).unwrap().edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn distance_tie_is_independent() {
        let d = deployment(vec![cell(1, 0., 0., 0., 1), cell(2, RCS, 0., 0., 1)], 1);
        assert_eq!(build_contention_graph(&d).unwrap().edge_count(), 0);
        let r = check_pbd(&d);
        assert_eq!(r.pairs[0].relation, PairRelation::Independent);
    }

    #[test]
    fn invalid_channel_is_rejected() {
        let d = deployment(vec![cell(1, 0., 0., 5., 3)], 2);
        let err = build_contention_graph(&d).unwrap_err();
        assert!(err.to_string().contains("cells[0].channel"), "{err}");
    }

    #[test]
    fn pbd_classification() {
        let dep = deployment(vec![cell(1, 0., 0., 10., 1), cell(2, 30., 0., 10., 1)], 1);
        let r = check_pbd(&dep);
        assert!(r.passes());
        assert_eq!(r.pairs[0].relation, PairRelation::CompletelyDependent);

        let ind = deployment(vec![cell(1, 0., 0., 10., 1), cell(2, 300., 0., 10., 1)], 1);
        let r = check_pbd(&ind);
        assert!(r.passes());
        assert_eq!(r.pairs[0].relation, PairRelation::Independent);

        let bad = deployment(vec![cell(1, 0., 0., 20., 1), cell(2, RCS, 0., 20., 1)], 1);
        let r = check_pbd(&bad);
        assert!(!r.passes());
        assert_eq!(r.violations().count(), 1);
    }

    /// Samples node positions on both discs and confirms that the boundary
    /// case really has node pairs on both sides of the sensing range.
    #[test]
    fn boundary_violation_matches_disc_sampling() {
        let (r, d) = (0.2 * RCS, RCS);
        let mut closer = false;
        let mut farther = false;
        let steps = 64;
        for a in 0..steps {
            for b in 0..steps {
                let ta = a as f64 / steps as f64 * std::f64::consts::TAU;
                let tb = b as f64 / steps as f64 * std::f64::consts::TAU;
                let p = (r * ta.cos(), r * ta.sin());
                let q = (d + r * tb.cos(), r * tb.sin());
                let dist = (p.0 - q.0).hypot(p.1 - q.1);
                closer |= dist < RCS;
                farther |= dist >= RCS;
            }
        }
        assert!(closer && farther);
    }

    #[test]
    fn restrict_examples() {
        let g = ContentionGraph::path(3);
        let sub = g.restrict_to(&[0, 2]).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.edge_count(), 0);
        assert_eq!(sub.labels(), &[0, 2]);
        assert!(g.restrict_to(&[]).unwrap().is_empty());
        assert_eq!(g.restrict(g.all_cells()).unwrap(), g);
        assert!(matches!(
            g.restrict_to(&[3]),
            Err(TopologyError::CellOutOfRange { index: 3, n: 3 })
        ));
    }

    #[test]
    fn restricted_labels_compose() {
        let g = ContentionGraph::path(5);
        let a = g.restrict_to(&[1, 2, 4]).unwrap();
        let b = a.restrict_to(&[1, 2]).unwrap();
        assert_eq!(b.labels(), &[2, 4]);
        assert_eq!(b.edge_count(), 0);
    }

    #[test]
    fn adjacency_list_round_trip() {
        let g = ContentionGraph::new(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let text = g.to_adjacency_list();
        assert_eq!(text, "1: 2 4\n2: 1 3\n3: 2\n4: 1\n");
        assert_eq!(ContentionGraph::from_adjacency_list(&text).unwrap(), g);
        assert!(ContentionGraph::from_adjacency_list("1: 2\n2:\n").is_err());
        assert!(g.to_dot().contains("1 -- 2;"));
    }

    #[test]
    fn self_loops_rejected() {
        assert!(ContentionGraph::new(2, &[(1, 1)]).is_err());
    }
}
