//! Undirected communication topology: adjacency, Laplacian, and algebraic
//! connectivity.
//!
//! The multiplier-consensus terms of the seeker and the gain conditions of the
//! parameter checkers both consume these quantities. Graphs are unweighted and
//! immutable after construction.

use nalgebra::DMatrix;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node index {index} out of range for a graph on {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("graph must have at least one node")]
    Empty,
}

/// Undirected graph on nodes `0..n` with no self-loops and no duplicate edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Builds a graph from an edge list. Edges are stored as unordered pairs;
    /// duplicates collapse.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n {
                return Err(GraphError::NodeOutOfRange { index: a, n });
            }
            if b >= n {
                return Err(GraphError::NodeOutOfRange { index: b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges: set,
            adjacency,
        })
    }

    /// Cycle 0-1-...-(n-1)-0. Requires n >= 3.
    pub fn ring(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::NodeOutOfRange { index: 2, n });
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// All-to-all graph.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j))))
    }

    /// Chain 0-1-...-(n-1).
    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Node 0 connected to every other node.
    pub fn star(n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::NodeOutOfRange { index: 1, n });
        }
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbor set of node `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], GraphError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GraphError::NodeOutOfRange {
                index: i,
                n: self.n,
            })
    }

    pub fn degree(&self, i: usize) -> Result<usize, GraphError> {
        self.neighbors(i).map(<[usize]>::len)
    }

    /// Breadth-first reachability of all nodes from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    /// Degree matrix minus adjacency matrix, with its second-smallest
    /// eigenvalue.
    pub fn laplacian(&self) -> Laplacian {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(a, b) in &self.edges {
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
            l[(a, b)] -= 1.0;
            l[(b, a)] -= 1.0;
        }
        let lambda2 = if self.n < 2 {
            0.0
        } else {
            let mut eigs: Vec<f64> = l
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eigs.sort_by(f64::total_cmp);
            eigs[1]
        };
        Laplacian { matrix: l, lambda2 }
    }

    /// Subgraph induced by `keep`, with nodes renumbered to 0..keep.len() in
    /// the order given.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Self, GraphError> {
        for &v in keep {
            if v >= self.n {
                return Err(GraphError::NodeOutOfRange {
                    index: v,
                    n: self.n,
                });
            }
        }
        let pos: std::collections::BTreeMap<usize, usize> =
            keep.iter().enumerate().map(|(idx, &v)| (v, idx)).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| match (pos.get(&a), pos.get(&b)) {
                (Some(&ra), Some(&rb)) => Some((ra, rb)),
                _ => None,
            });
        Self::new(keep.len(), edges)
    }
}

/// Dense Laplacian of a [`CommGraph`] together with its algebraic
/// connectivity.
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub matrix: DMatrix<f64>,
    pub lambda2: f64,
}
