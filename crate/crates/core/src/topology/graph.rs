use std::fmt::Write as _;

use super::{Deployment, TopologyError};
use crate::CellSet;

/// Cell-level contention graph: one vertex per cell, an edge per pair of
/// completely dependent cells.
///
/// Vertices are addressed by local index `0..n`. `labels[k]` is the 0-based
/// index of vertex `k` in the graph it was originally built from, so
/// restricted subgraphs keep track of which cells they contain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContentionGraph {
    labels: Vec<usize>,
    adj: Vec<CellSet>,
}

impl ContentionGraph {
    /// Graph on `n` vertices with the given undirected edges (0-based).
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        if n > crate::MAX_CELLS {
            return Err(TopologyError::TooManyCells(n));
        }
        let mut adj = vec![CellSet::EMPTY; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(TopologyError::CellOutOfRange {
                    index: a.max(b),
                    n,
                });
            }
            if a == b {
                return Err(TopologyError::Invalid(format!("self-loop on cell {}", a + 1)));
            }
            adj[a].insert(b);
            adj[b].insert(a);
        }
        Ok(Self {
            labels: (0..n).collect(),
            adj,
        })
    }

    pub fn edgeless(n: usize) -> Self {
        Self::new(n, &[]).expect("edgeless graph within size limit")
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        Self::new(n, &edges).expect("complete graph within size limit")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|b| (b - 1, b)).collect();
        Self::new(n, &edges).expect("path graph within size limit")
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn all_cells(&self) -> CellSet {
        CellSet::full(self.len())
    }

    pub fn neighbors(&self, i: usize) -> CellSet {
        self.adj[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Edges `(a, b)` with `a < b`, in increasing order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in self.adj[a].iter().filter(|&b| b > a) {
                out.push((a, b));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    /// True when no two members of `s` are adjacent.
    pub fn is_independent(&self, s: CellSet) -> bool {
        s.iter().all(|i| self.adj[i].is_disjoint(s))
    }

    /// Union of the neighborhoods of the members of `s`.
    pub fn neighborhood(&self, s: CellSet) -> CellSet {
        s.iter()
            .fold(CellSet::EMPTY, |acc, i| acc.union(self.adj[i]))
    }

    /// Induced subgraph on `cells` (local indices). Vertex `k` of the result
    /// is the `k`-th smallest member of `cells`.
    pub fn restrict(&self, cells: CellSet) -> Result<Self, TopologyError> {
        if let Some(bad) = cells.difference(self.all_cells()).first() {
            return Err(TopologyError::CellOutOfRange {
                index: bad,
                n: self.len(),
            });
        }
        let members = cells.to_vec();
        let mut adj = vec![CellSet::EMPTY; members.len()];
        for (ka, &a) in members.iter().enumerate() {
            for (kb, &b) in members.iter().enumerate() {
                if self.adj[a].contains(b) {
                    adj[ka].insert(kb);
                }
            }
        }
        Ok(Self {
            labels: members.iter().map(|&a| self.labels[a]).collect(),
            adj,
        })
    }

    /// Same as [`restrict`](Self::restrict) for an explicit list of indices.
    pub fn restrict_to(&self, cells: &[usize]) -> Result<Self, TopologyError> {
        if let Some(&bad) = cells.iter().find(|&&c| c >= self.len()) {
            return Err(TopologyError::CellOutOfRange {
                index: bad,
                n: self.len(),
            });
        }
        self.restrict(cells.iter().copied().collect())
    }

    /// One line per vertex: `id: neighbor neighbor ...`, with 1-based ids
    /// taken from the labels.
    pub fn to_adjacency_list(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let _ = write!(out, "{}:", self.labels[i] + 1);
            for j in self.adj[i].iter() {
                let _ = write!(out, " {}", self.labels[j] + 1);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`to_adjacency_list`](Self::to_adjacency_list).
    /// Ids must be `1..=n` in order.
    pub fn from_adjacency_list(text: &str) -> Result<Self, TopologyError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let n = lines.len();
        let mut edges = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            let (head, tail) = line
                .split_once(':')
                .ok_or_else(|| TopologyError::Parse(format!("line {}: missing ':'", k + 1)))?;
            let id: usize = head
                .trim()
                .parse()
                .map_err(|_| TopologyError::Parse(format!("line {}: bad id", k + 1)))?;
            if id != k + 1 {
                return Err(TopologyError::Parse(format!(
                    "line {}: expected id {}, got {id}",
                    k + 1,
                    k + 1
                )));
            }
            for tok in tail.split_whitespace() {
                let j: usize = tok
                    .parse()
                    .map_err(|_| TopologyError::Parse(format!("line {}: bad neighbor {tok}", k + 1)))?;
                if j == 0 || j > n {
                    return Err(TopologyError::CellOutOfRange { index: j, n });
                }
                edges.push((k, j - 1));
            }
        }
        let g = Self::new(n, &edges)?;
        // every listed edge must appear from both endpoints
        let listed = edges.len();
        if listed != 2 * g.edge_count() {
            return Err(TopologyError::Parse("adjacency list is not symmetric".into()));
        }
        Ok(g)
    }

    /// Undirected DOT description, vertices named by 1-based label.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph contention {\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "  {};", self.labels[i] + 1);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  {} -- {};", self.labels[a] + 1, self.labels[b] + 1);
        }
        out.push_str("}\n");
        out
    }
}

/// Cells `i` and `j` are adjacent iff they share a channel and their APs are
/// strictly closer than the carrier-sensing range.
pub fn build_contention_graph(d: &Deployment) -> Result<ContentionGraph, TopologyError> {
    d.validate()?;
    let n = d.len();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if d.cells[a].channel == d.cells[b].channel
                && d.ap_distance(a, b) < d.carrier_sense_range
            {
                edges.push((a, b));
            }
        }
    }
    ContentionGraph::new(n, &edges)
}
