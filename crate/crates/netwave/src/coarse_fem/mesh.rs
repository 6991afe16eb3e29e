//! Uniform hypercube coarse mesh over `[0,1]^d`.
//!
//! Elements are the boxes `B_{H/2}` around lattice centers: half-open in
//! every dimension, closed on upper faces that lie on the domain boundary,
//! so every network node belongs to exactly one element. Dirichlet
//! conditions are imposed on full element edges: a mesh node is constrained
//! exactly when its basis function is nonzero at some Γ node, which keeps
//! every coarse function zero on Γ while constraining no more of the facet
//! than the Γ nodes reach.

use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Debug, Clone)]
pub struct CoarseMesh {
    h: f64,
    level: u32,
    dim: usize,
    /// Elements per dimension (2^level).
    nx: usize,
    /// Network nodes per element.
    elem_nodes: Vec<Vec<usize>>,
    /// Element of each network node.
    node_elem: Vec<usize>,
    /// Free coarse node ids (lattice order).
    free_nodes: Vec<usize>,
    /// Free rank per coarse node id.
    free_rank: Vec<Option<usize>>,
    constrained: Vec<bool>,
}

/// Builds the mesh at size `H = 2^{-level}`, `level >= 1`. Every element must
/// contain at least one network node.
pub fn build_mesh(net: &Network, level: u32) -> Result<CoarseMesh> {
    if level == 0 {
        return Err(Error::Config("mesh level must be at least 1".into()));
    }
    let dim = net.dim();
    let nx = 1usize << level;
    let h = 1.0 / nx as f64;
    let n_elems = nx.pow(dim as u32);
    let n_mesh_nodes = (nx + 1).pow(dim as u32);

    let mut elem_nodes = vec![Vec::new(); n_elems];
    let mut node_elem = vec![0usize; net.n_nodes()];
    for node in 0..net.n_nodes() {
        let e = element_of_point(net.coord(node), nx, h);
        elem_nodes[e].push(node);
        node_elem[node] = e;
    }
    if let Some(e) = elem_nodes.iter().position(|nodes| nodes.is_empty()) {
        return Err(Error::EmptyElement { element: e });
    }

    // Constrain every coarse node whose basis function is nonzero at a Γ
    // node. Basis functions of corners of other elements vanish at the node,
    // so checking the containing element's corners suffices.
    let mut constrained = vec![false; n_mesh_nodes];
    let mesh_probe = CoarseMesh {
        h,
        level,
        dim,
        nx,
        elem_nodes: Vec::new(),
        node_elem: Vec::new(),
        free_nodes: Vec::new(),
        free_rank: Vec::new(),
        constrained: Vec::new(),
    };
    for g in net.boundary_nodes() {
        let c = net.coord(g);
        let e = node_elem[g];
        for corner in element_corners(e, nx, dim) {
            if mesh_probe.basis_value(corner, c) > 0.0 {
                constrained[corner] = true;
            }
        }
    }

    let mut free_nodes = Vec::new();
    let mut free_rank = vec![None; n_mesh_nodes];
    for id in 0..n_mesh_nodes {
        if !constrained[id] {
            free_rank[id] = Some(free_nodes.len());
            free_nodes.push(id);
        }
    }

    Ok(CoarseMesh {
        h,
        level,
        dim,
        nx,
        elem_nodes,
        node_elem,
        free_nodes,
        free_rank,
        constrained,
    })
}

/// Element index of a point under the half-open box rule (upper faces closed
/// on the domain boundary).
fn element_of_point(coord: &[f64], nx: usize, h: f64) -> usize {
    let mut idx = 0usize;
    for &c in coord.iter().rev() {
        let j = ((c / h).floor() as usize).min(nx - 1);
        idx = idx * nx + j;
    }
    idx
}

fn element_corners(elem: usize, nx: usize, dim: usize) -> Vec<usize> {
    let base = element_multi_index(elem, nx, dim);
    let mut corners = Vec::with_capacity(1 << dim);
    for mask in 0..(1usize << dim) {
        let mut idx = base.clone();
        for (d, i) in idx.iter_mut().enumerate() {
            if mask & (1 << d) != 0 {
                *i += 1;
            }
        }
        corners.push(lattice_id(&idx, nx));
    }
    corners
}

pub(crate) fn element_multi_index(elem: usize, nx: usize, dim: usize) -> Vec<usize> {
    let mut rem = elem;
    let mut idx = vec![0usize; dim];
    for i in idx.iter_mut() {
        *i = rem % nx;
        rem /= nx;
    }
    idx
}

pub(crate) fn lattice_id(idx: &[usize], nx: usize) -> usize {
    let mut id = 0usize;
    for &i in idx.iter().rev() {
        id = id * (nx + 1) + i;
    }
    id
}

pub(crate) fn lattice_multi_index(id: usize, nx: usize, dim: usize) -> Vec<usize> {
    let mut rem = id;
    let mut idx = vec![0usize; dim];
    for i in idx.iter_mut() {
        *i = rem % (nx + 1);
        rem /= nx + 1;
    }
    idx
}

impl CoarseMesh {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Elements per dimension.
    pub fn elements_per_dim(&self) -> usize {
        self.nx
    }

    pub fn n_elements(&self) -> usize {
        self.elem_nodes.len()
    }

    pub fn n_mesh_nodes(&self) -> usize {
        (self.nx + 1).pow(self.dim as u32)
    }

    /// Count of free coarse nodes `m_0`.
    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn free_rank(&self, mesh_node: usize) -> Option<usize> {
        self.free_rank[mesh_node]
    }

    pub fn is_constrained(&self, mesh_node: usize) -> bool {
        self.constrained[mesh_node]
    }

    pub fn element_nodes(&self, elem: usize) -> &[usize] {
        &self.elem_nodes[elem]
    }

    pub fn element_of_node(&self, node: usize) -> usize {
        self.node_elem[node]
    }

    pub fn element_index(&self, elem: usize) -> Vec<usize> {
        element_multi_index(elem, self.nx, self.dim)
    }

    pub fn element_id(&self, idx: &[usize]) -> usize {
        let mut id = 0usize;
        for &i in idx.iter().rev() {
            id = id * self.nx + i;
        }
        id
    }

    /// Corner mesh nodes of an element, in lattice mask order.
    pub fn element_corner_ids(&self, elem: usize) -> Vec<usize> {
        element_corners(elem, self.nx, self.dim)
    }

    pub fn mesh_node_coord(&self, mesh_node: usize) -> Vec<f64> {
        lattice_multi_index(mesh_node, self.nx, self.dim)
            .iter()
            .map(|&i| i as f64 * self.h)
            .collect()
    }

    /// Elements whose closure contains the mesh node (the support of its
    /// basis function).
    pub fn support_elements(&self, mesh_node: usize) -> Vec<usize> {
        let idx = lattice_multi_index(mesh_node, self.nx, self.dim);
        let mut elems = Vec::with_capacity(1 << self.dim);
        for mask in 0..(1usize << self.dim) {
            let mut e = Vec::with_capacity(self.dim);
            let mut ok = true;
            for (d, &i) in idx.iter().enumerate() {
                let shift = (mask >> d) & 1;
                if shift == 1 {
                    if i == 0 {
                        ok = false;
                        break;
                    }
                    e.push(i - 1);
                } else {
                    if i >= self.nx {
                        ok = false;
                        break;
                    }
                    e.push(i);
                }
            }
            if ok {
                let id = self.element_id(&e);
                if !elems.contains(&id) {
                    elems.push(id);
                }
            }
        }
        elems.sort_unstable();
        elems
    }

    /// The element containing the mesh node under the half-open rule (used by
    /// the non-averaged interpolant).
    pub fn owning_element(&self, mesh_node: usize) -> usize {
        let coord = self.mesh_node_coord(mesh_node);
        element_of_point(&coord, self.nx, self.h)
    }

    /// Value of the bilinear basis function of `mesh_node` at a point.
    pub fn basis_value(&self, mesh_node: usize, point: &[f64]) -> f64 {
        let idx = lattice_multi_index(mesh_node, self.nx, self.dim);
        let mut value = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            let center = i as f64 * self.h;
            let t = 1.0 - (point[d] - center).abs() / self.h;
            if t <= 0.0 {
                return 0.0;
            }
            value *= t;
        }
        value
    }

    /// Warning when the network's longest edge reaches the mesh size (the
    /// locality hypothesis `H >= R_0` is then questionable).
    pub fn locality_warning(&self, net: &Network) -> Option<String> {
        let max_edge = net.max_edge_length();
        if max_edge >= self.h {
            Some(format!(
                "max edge length {max_edge:.3e} is not below H = {:.3e}; consider a coarser mesh",
                self.h
            ))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_fiber_network, grid_network, three_node_path, GeneratorConfig};

    #[test]
    fn lattice_counts_for_h_half() {
        let net = grid_network(4);
        let mesh = build_mesh(&net, 1).unwrap();
        assert_eq!(mesh.n_elements(), 4);
        assert_eq!(mesh.n_mesh_nodes(), 9);
    }

    #[test]
    fn empty_element_is_an_error() {
        // The 3-node path lies on y = 0, so the upper elements are empty.
        let net = three_node_path();
        assert!(matches!(
            build_mesh(&net, 1),
            Err(Error::EmptyElement { .. })
        ));
    }

    #[test]
    fn half_open_rule_assigns_midpoint_to_upper_element() {
        let net = grid_network(2);
        let mesh = build_mesh(&net, 1).unwrap();
        // Node (0.5, 0) belongs to the element whose lower x-bound is 0.5.
        let node = (0..net.n_nodes())
            .find(|&i| net.coord(i) == [0.5, 0.0])
            .unwrap();
        assert_eq!(mesh.element_index(mesh.element_of_node(node)), vec![1, 0]);
        // Node (1.0, 1.0) stays in the last element (closure on the domain
        // boundary).
        let corner = (0..net.n_nodes())
            .find(|&i| net.coord(i) == [1.0, 1.0])
            .unwrap();
        assert_eq!(mesh.element_index(mesh.element_of_node(corner)), vec![1, 1]);
        // Tiling: element node lists partition the node set.
        let total: usize = (0..mesh.n_elements())
            .map(|e| mesh.element_nodes(e).len())
            .sum();
        assert_eq!(total, net.n_nodes());
    }

    #[test]
    fn boundary_faces_constrain_full_edges() {
        let net = grid_network(2); // Γ on the faces x = 0 and x = 1
        let mesh = build_mesh(&net, 1).unwrap();
        for id in 0..mesh.n_mesh_nodes() {
            let c = mesh.mesh_node_coord(id);
            if c[0] == 0.0 || c[0] == 1.0 {
                assert!(mesh.is_constrained(id), "mesh node {c:?} should be constrained");
            } else {
                assert!(!mesh.is_constrained(id), "mesh node {c:?} should be free");
            }
        }
        assert_eq!(mesh.n_free(), 3); // the x = 0.5 column
    }

    #[test]
    fn generated_network_fills_mesh() {
        let net = generate_fiber_network(&GeneratorConfig::new(100.0, 1)).unwrap();
        let mesh = build_mesh(&net, 3).unwrap();
        assert_eq!(mesh.n_elements(), 64);
        let total: usize = (0..64).map(|e| mesh.element_nodes(e).len()).sum();
        assert_eq!(total, net.n_nodes());
    }

    #[test]
    fn basis_reproduces_partition_of_unity() {
        let net = three_node_path();
        let mesh = build_mesh(&net, 1).unwrap();
        let p = [0.3, 0.2];
        let total: f64 = (0..mesh.n_mesh_nodes())
            .map(|id| mesh.basis_value(id, &p))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_elements_of_interior_node() {
        let net = generate_fiber_network(&GeneratorConfig::new(100.0, 1)).unwrap();
        let mesh = build_mesh(&net, 2).unwrap();
        // Interior mesh node (1,1) has 4 supporting elements.
        let id = lattice_id(&[1, 1], 4);
        assert_eq!(mesh.support_elements(id).len(), 4);
        // Corner mesh node (0,0) has 1.
        let id = lattice_id(&[0, 0], 4);
        assert_eq!(mesh.support_elements(id).len(), 1);
    }
}
