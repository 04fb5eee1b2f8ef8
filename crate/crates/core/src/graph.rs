//! Undirected, connected, time-invariant communication topology.
//!
//! Edges are stored with a canonical orientation (tail = smaller node index), so
//! the relative position carried by edge `k = (i, j)` is `z_k = q_i - q_j` and the
//! incidence column of `k` holds `+1` at `i` and `-1` at `j`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FlockError, Result};

/// Upper bound on Erdős–Rényi resamples before giving up on connectivity.
pub const MAX_RANDOM_ATTEMPTS: usize = 100_000;

/// A canonically oriented undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// An edge together with its index and desired inter-agent distance `d_k` (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub edge_index: usize,
    pub tail: usize,
    pub head: usize,
    pub desired_distance: f64,
}

/// Neighbor of an agent, with the index of the edge that connects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub neighbor: usize,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    node_count: usize,
    edges: Vec<Edge>,
    adjacency: DMatrix<f64>,
    incidence: DMatrix<f64>,
    links: Vec<Vec<Link>>,
}

impl CommGraph {
    /// Builds a graph from an edge list. Pairs may be given in either order.
    pub fn new(node_count: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if node_count < 2 {
            return Err(FlockError::InvalidGraph(format!(
                "at least 2 nodes required, got {node_count}"
            )));
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a >= node_count || b >= node_count {
                return Err(FlockError::InvalidEdge(a, b, "endpoint out of range"));
            }
            if a == b {
                return Err(FlockError::InvalidEdge(a, b, "self-loop"));
            }
            let edge = Edge {
                tail: a.min(b),
                head: a.max(b),
            };
            if !seen.insert(edge) {
                return Err(FlockError::InvalidEdge(a, b, "duplicate edge"));
            }
            edges.push(edge);
        }

        let mut adjacency = DMatrix::zeros(node_count, node_count);
        let mut incidence = DMatrix::zeros(node_count, edges.len());
        let mut links = vec![Vec::new(); node_count];
        for (k, e) in edges.iter().enumerate() {
            adjacency[(e.tail, e.head)] = 1.0;
            adjacency[(e.head, e.tail)] = 1.0;
            incidence[(e.tail, k)] = 1.0;
            incidence[(e.head, k)] = -1.0;
            links[e.tail].push(Link {
                neighbor: e.head,
                edge: k,
            });
            links[e.head].push(Link {
                neighbor: e.tail,
                edge: k,
            });
        }
        for l in links.iter_mut() {
            l.sort_by_key(|link| link.neighbor);
        }

        let graph = CommGraph {
            node_count,
            edges,
            adjacency,
            incidence,
            links,
        };
        if let Some(unreachable) = graph.first_unreachable() {
            return Err(FlockError::DisconnectedGraph { unreachable });
        }
        Ok(graph)
    }

    /// Erdős–Rényi `G(n, p)` resampled from a seeded stream until connected.
    pub fn random_connected(node_count: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        if !(edge_probability > 0.0 && edge_probability <= 1.0) {
            return Err(FlockError::InvalidParameter(format!(
                "edge probability must lie in (0, 1], got {edge_probability}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_RANDOM_ATTEMPTS {
            let mut pairs = Vec::new();
            for i in 0..node_count {
                for j in (i + 1)..node_count {
                    if rng.random::<f64>() < edge_probability {
                        pairs.push((i, j));
                    }
                }
            }
            match CommGraph::new(node_count, &pairs) {
                Ok(g) => return Ok(g),
                Err(FlockError::DisconnectedGraph { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(FlockError::InvalidGraph(format!(
            "no connected sample after {MAX_RANDOM_ATTEMPTS} attempts (n = {node_count}, p = {edge_probability})"
        )))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    /// Sorted neighbor set of node `i`.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        self.check_node(i)?;
        Ok(self.links[i].iter().map(|l| l.neighbor).collect())
    }

    /// Neighbors of `i` with their connecting edges, sorted by neighbor index.
    ///
    /// Panics if `i` is out of range; use [`CommGraph::neighbors`] for a checked query.
    pub fn links(&self, i: usize) -> &[Link] {
        &self.links[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.links[i].len()
    }

    /// Attaches desired distances to the edges. `distances` holds either one
    /// value shared by all edges or one value per edge.
    pub fn edge_specs(&self, distances: &[f64]) -> Result<Vec<EdgeSpec>> {
        let per_edge = match distances.len() {
            1 => false,
            n if n == self.edges.len() => true,
            n => {
                return Err(FlockError::DimensionMismatch {
                    expected: self.edges.len(),
                    actual: n,
                })
            }
        };
        self.edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let d = if per_edge { distances[k] } else { distances[0] };
                if !(d > 0.0) {
                    return Err(FlockError::InvalidParameter(format!(
                        "desired distance on edge {k} must be positive, got {d}"
                    )));
                }
                Ok(EdgeSpec {
                    edge_index: k,
                    tail: e.tail,
                    head: e.head,
                    desired_distance: d,
                })
            })
            .collect()
    }

    /// Stacked relative positions `z = (B ⊗ I_d)ᵀ q` for stacked positions of dimension `d`.
    pub fn relative_positions(&self, q: &[f64], dim: usize) -> Result<Vec<f64>> {
        let expected = dim * self.node_count;
        if dim == 0 || q.len() != expected {
            return Err(FlockError::DimensionMismatch {
                expected,
                actual: q.len(),
            });
        }
        let b_bar = self.incidence.kronecker(&DMatrix::<f64>::identity(dim, dim));
        let z = b_bar.transpose() * DVector::from_column_slice(q);
        Ok(z.as_slice().to_vec())
    }

    /// Graph Laplacian `B Bᵀ`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        &self.incidence * self.incidence.transpose()
    }

    /// Second-smallest Laplacian eigenvalue (algebraic connectivity).
    pub fn algebraic_connectivity(&self) -> f64 {
        let mut eig: Vec<f64> = self.laplacian().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        eig[1]
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.node_count {
            return Err(FlockError::NodeOutOfRange {
                node: i,
                node_count: self.node_count,
            });
        }
        Ok(())
    }

    fn first_unreachable(&self) -> Option<usize> {
        let mut visited = vec![false; self.node_count];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(u) = queue.pop_front() {
            for l in &self.links[u] {
                if !visited[l.neighbor] {
                    visited[l.neighbor] = true;
                    queue.push_back(l.neighbor);
                }
            }
        }
        visited.iter().position(|v| !v)
    }
}
