//! Spatial networks: embedded graphs on the unit hypercube with Dirichlet
//! node sets, plus generation, validation, and file formats.

pub mod generate;
pub mod geometry;
mod validate;

pub use generate::{
    generate_fiber_network, generate_with_stats, GeneratorConfig, GeneratorStats,
    DEFAULT_MERGE_TOL_FACTOR, DEFAULT_SEGMENT_LENGTH,
};
pub use validate::{validate_assumptions, NetworkQualityReport, RadiusCheck};

use crate::error::{Error, Result};

/// A connected graph embedded in `[0,1]^d`. Edge lengths are the Euclidean
/// distances between endpoint coordinates; `boundary` marks the Dirichlet
/// node set Γ. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Network {
    dim: usize,
    coords: Vec<f64>,
    edges: Vec<[usize; 2]>,
    edge_length: Vec<f64>,
    boundary: Vec<bool>,
    n_boundary: usize,
    adj_ptr: Vec<usize>,
    /// (neighbor node, incident edge id), grouped per node.
    adj: Vec<(usize, usize)>,
}

impl Network {
    /// Validates and builds a network. Edges are canonicalized to `i < j`;
    /// self-loops, duplicate edges, out-of-range indices, coordinates outside
    /// the unit hypercube, and disconnected graphs are rejected.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        edges: Vec<[usize; 2]>,
        boundary_nodes: &[usize],
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNetwork("dimension must be positive".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::InvalidNetwork(format!(
                "coordinate array length {} is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        let n = coords.len() / dim;
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() || *c < -1e-9 || *c > 1.0 + 1e-9 {
                return Err(Error::InvalidNetwork(format!(
                    "node {} coordinate {} outside the unit hypercube",
                    i / dim,
                    c
                )));
            }
        }
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            let (a, b) = (e[0], e[1]);
            if a >= n || b >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidNetwork(format!("self-loop at node {a}")));
            }
            let key = if a < b { [a, b] } else { [b, a] };
            if !seen.insert(key) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate edge ({}, {})",
                    key[0], key[1]
                )));
            }
            canonical.push(key);
        }
        let edge_length: Vec<f64> = canonical
            .iter()
            .map(|e| euclidean(&coords[e[0] * dim..(e[0] + 1) * dim], &coords[e[1] * dim..(e[1] + 1) * dim]))
            .collect();
        if let Some(pos) = edge_length.iter().position(|l| *l <= 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "edge ({}, {}) has zero length",
                canonical[pos][0], canonical[pos][1]
            )));
        }

        let mut boundary = vec![false; n];
        for &b in boundary_nodes {
            if b >= n {
                return Err(Error::InvalidNetwork(format!(
                    "boundary index {b} outside 0..{n}"
                )));
            }
            boundary[b] = true;
        }
        let n_boundary = boundary.iter().filter(|b| **b).count();

        // Adjacency, grouped by node in edge order.
        let mut degree = vec![0usize; n];
        for e in &canonical {
            degree[e[0]] += 1;
            degree[e[1]] += 1;
        }
        let mut adj_ptr = vec![0usize; n + 1];
        for i in 0..n {
            adj_ptr[i + 1] = adj_ptr[i] + degree[i];
        }
        let mut adj = vec![(0usize, 0usize); adj_ptr[n]];
        let mut next = adj_ptr.clone();
        for (eid, e) in canonical.iter().enumerate() {
            adj[next[e[0]]] = (e[1], eid);
            next[e[0]] += 1;
            adj[next[e[1]]] = (e[0], eid);
            next[e[1]] += 1;
        }

        let net = Network {
            dim,
            coords,
            edges: canonical,
            edge_length,
            boundary,
            n_boundary,
            adj_ptr,
            adj,
        };
        if !net.is_connected() {
            return Err(Error::InvalidNetwork("graph is not connected".into()));
        }
        Ok(net)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn coord(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_length(&self) -> &[f64] {
        &self.edge_length
    }

    /// Neighbors of `node` as `(neighbor, edge id)` pairs.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_ptr[node]..self.adj_ptr[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj_ptr[node + 1] - self.adj_ptr[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.boundary[i]).collect()
    }

    /// Free (non-Dirichlet) nodes in ascending order.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| !self.boundary[i]).collect()
    }

    pub fn total_edge_length(&self) -> f64 {
        self.edge_length.iter().sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edge_length.iter().cloned().fold(0.0, f64::max)
    }

    /// Lumped mass at a node: half the total length of incident edges.
    pub fn node_mass(&self, node: usize) -> f64 {
        self.neighbors(node)
            .iter()
            .map(|&(_, e)| self.edge_length[e])
            .sum::<f64>()
            * 0.5
    }

    /// Replaces the Dirichlet set with the nodes selected by `predicate` on
    /// coordinates. Errors if the selection is empty.
    pub fn assign_boundary<F: Fn(&[f64]) -> bool>(&self, predicate: F) -> Result<Network> {
        let selected: Vec<usize> = (0..self.n_nodes())
            .filter(|&i| predicate(self.coord(i)))
            .collect();
        if selected.is_empty() {
            return Err(Error::InvalidNetwork(
                "boundary predicate selected no nodes".into(),
            ));
        }
        let mut net = self.clone();
        net.boundary = vec![false; self.n_nodes()];
        for &i in &selected {
            net.boundary[i] = true;
        }
        net.n_boundary = selected.len();
        Ok(net)
    }

    fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return false;
        }
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in self.neighbors(v) {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A 3-node path on the x-axis with the given spacing; used widely in tests.
#[cfg(test)]
pub(crate) fn three_node_path() -> Network {
    Network::new(
        2,
        vec![0.0, 0.0, 0.5, 0.0, 1.0, 0.0],
        vec![[0, 1], [1, 2]],
        &[0, 2],
    )
    .unwrap()
}

/// Regular `(m+1) x (m+1)` lattice graph over the unit square with Dirichlet
/// nodes on the faces `x_1 in {0, 1}`; a homogeneous control network for
/// tests.
#[cfg(test)]
pub(crate) fn grid_network(m: usize) -> Network {
    let n = m + 1;
    let mut coords = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push(i as f64 / m as f64);
            coords.push(j as f64 / m as f64);
        }
    }
    let id = |i: usize, j: usize| j * n + i;
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i + 1 < n {
                edges.push([id(i, j), id(i + 1, j)]);
            }
            if j + 1 < n {
                edges.push([id(i, j), id(i, j + 1)]);
            }
        }
    }
    let boundary: Vec<usize> = (0..n * n)
        .filter(|&k| {
            let x = coords[2 * k];
            x == 0.0 || x == 1.0
        })
        .collect();
    Network::new(2, coords, edges, &boundary).unwrap()
}
