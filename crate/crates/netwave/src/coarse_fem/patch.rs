//! Coarse grid patches `U_k`: k-fold closure-adjacency dilations of a seed
//! element or coarse node, with local index maps for the patch fine space.

use crate::network::Network;

use super::mesh::lattice_multi_index;
use super::CoarseMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchSeed {
    Element(usize),
    CoarseNode(usize),
}

#[derive(Debug, Clone)]
pub struct Patch {
    pub k: usize,
    /// Element index ranges per dimension (inclusive).
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    /// Elements of the patch, ascending.
    pub elements: Vec<usize>,
    /// Free network nodes interior to the patch (global ids, ascending).
    /// Nodes on the patch closure boundary are excluded unless that boundary
    /// lies on the domain boundary.
    pub fine_nodes: Vec<usize>,
    /// Global node id -> local index.
    pub local_of_node: Vec<Option<usize>>,
    /// Free coarse ranks whose basis support intersects the patch.
    pub coarse_ranks: Vec<usize>,
}

/// Builds `U_k(seed)`. With `k = 0` the patch is the seed's own element(s).
pub fn build_patch(mesh: &CoarseMesh, net: &Network, seed: PatchSeed, k: usize) -> Patch {
    let dim = mesh.dim();
    let nx = mesh.elements_per_dim();

    // Seed block per dimension.
    let (mut lo, mut hi) = match seed {
        PatchSeed::Element(e) => {
            let idx = mesh.element_index(e);
            (idx.clone(), idx)
        }
        PatchSeed::CoarseNode(id) => {
            let idx = lattice_multi_index(id, nx, dim);
            let lo = idx
                .iter()
                .map(|&i| i.saturating_sub(1))
                .collect::<Vec<_>>();
            let hi = idx
                .iter()
                .map(|&i| i.min(nx - 1))
                .collect::<Vec<_>>();
            // A node's adjacent elements are those whose closure contains it:
            // indices i-1 and i, clamped to the lattice. This is U(x); k
            // layers then dilate k-1 more times.
            (lo, hi)
        }
    };
    let dilation = match seed {
        PatchSeed::Element(_) => k,
        PatchSeed::CoarseNode(_) => k.saturating_sub(1),
    };
    for d in 0..dim {
        lo[d] = lo[d].saturating_sub(dilation);
        hi[d] = (hi[d] + dilation).min(nx - 1);
    }

    let mut elements = Vec::new();
    let mut idx = lo.clone();
    'outer: loop {
        elements.push(mesh.element_id(&idx));
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] <= hi[d] {
                break;
            }
            idx[d] = lo[d];
            d += 1;
            if d == dim {
                break 'outer;
            }
        }
    }
    elements.sort_unstable();

    // Patch interior fine nodes: free nodes of patch elements excluding the
    // patch closure boundary away from the domain boundary.
    let h = mesh.h();
    let mut fine_nodes = Vec::new();
    let mut local_of_node = vec![None; net.n_nodes()];
    for &e in &elements {
        for &node in mesh.element_nodes(e) {
            if net.is_boundary(node) {
                continue;
            }
            let c = net.coord(node);
            let mut interior = true;
            for d in 0..dim {
                let lo_plane = lo[d] as f64 * h;
                let hi_plane = (hi[d] + 1) as f64 * h;
                if c[d] <= lo_plane && lo[d] > 0 {
                    interior = false;
                    break;
                }
                if c[d] >= hi_plane && hi[d] + 1 < nx {
                    interior = false;
                    break;
                }
            }
            if interior {
                local_of_node[node] = Some(0);
                fine_nodes.push(node);
            }
        }
    }
    fine_nodes.sort_unstable();
    for (li, &node) in fine_nodes.iter().enumerate() {
        local_of_node[node] = Some(li);
    }

    // Coarse nodes whose basis support meets the patch: lattice nodes in
    // [lo, hi+1] per dimension.
    let mut coarse_ranks = Vec::new();
    for (rank, &mesh_node) in mesh.free_nodes().iter().enumerate() {
        let idx = lattice_multi_index(mesh_node, nx, dim);
        let inside = (0..dim).all(|d| idx[d] >= lo[d] && idx[d] <= hi[d] + 1);
        if inside {
            coarse_ranks.push(rank);
        }
    }

    Patch {
        k,
        lo,
        hi,
        elements,
        fine_nodes,
        local_of_node,
        coarse_ranks,
    }
}

impl Patch {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_fine(&self) -> usize {
        self.fine_nodes.len()
    }

    /// True when the patch covers the whole domain.
    pub fn is_saturated(&self, mesh: &CoarseMesh) -> bool {
        self.n_elements() == mesh.n_elements()
    }

    /// Restriction of a full-node vector to patch-local coordinates.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.fine_nodes.iter().map(|&n| full[n]).collect()
    }

    /// Scatters patch-local values into a full-node vector.
    pub fn scatter_add(&self, local: &[f64], full: &mut [f64]) {
        for (li, &node) in self.fine_nodes.iter().enumerate() {
            full[node] += local[li];
        }
    }
}
