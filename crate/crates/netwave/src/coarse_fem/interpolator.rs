//! Quasi-interpolation onto the restricted coarse space.
//!
//! For each free coarse node `j` and supporting element `T`, the dual weight
//! vector solves the local Gram system `(M_T psi_j, phi_l) = delta_{jl}` over
//! the element's corner basis functions. The nodal functional is either the
//! single owning-element functional or, with averaging enabled, the mean over
//! all supporting elements (elements with singular Gram matrices are skipped;
//! it is an error only if every candidate element is singular).

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::network::Network;
use crate::operators::SparseOperator;

use super::CoarseMesh;

/// Threshold on the local Gram pivot ratio below which an element is treated
/// as singular for dual-weight purposes.
const GRAM_PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Interpolator {
    /// Functional rows: m0 x n_nodes, row j evaluates the nodal value of the
    /// interpolant at free coarse node j.
    functionals: CsrMatrix,
    /// Prolongation: n_nodes x m0, basis values of free coarse nodes at
    /// network nodes.
    prolongation: CsrMatrix,
    averaging: bool,
    /// Largest local Gram condition estimate across used elements.
    worst_gram_condition: f64,
}

/// Builds the interpolation operator. `mass` must be the unconstrained
/// scalar mass operator of the same network.
pub fn build_interpolator(
    mesh: &CoarseMesh,
    net: &Network,
    mass: &SparseOperator,
    averaging: bool,
) -> Result<Interpolator> {
    assert_eq!(mass.components(), 1, "interpolator needs the scalar mass");
    assert!(!mass.is_constrained(), "interpolator needs the full mass");
    let n = net.n_nodes();
    let mass_diag = mass
        .diagonal()
        .expect("mass operator is diagonal by construction");

    // Prolongation columns: basis values of free coarse nodes.
    let mut p_triplets = Vec::new();
    for node in 0..n {
        let elem = mesh.element_of_node(node);
        for corner in mesh.element_corner_ids(elem) {
            if let Some(rank) = mesh.free_rank(corner) {
                let phi = mesh.basis_value(corner, net.coord(node));
                if phi != 0.0 {
                    p_triplets.push((node, rank, phi));
                }
            }
        }
    }
    let prolongation = CsrMatrix::from_triplets(n, mesh.n_free(), &p_triplets);

    let mut f_triplets = Vec::new();
    let mut worst_cond: f64 = 1.0;
    for (rank, &mesh_node) in mesh.free_nodes().iter().enumerate() {
        let elements = if averaging {
            mesh.support_elements(mesh_node)
        } else {
            vec![mesh.owning_element(mesh_node)]
        };
        let mut contributions: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut last_singular = 0usize;
        for &elem in &elements {
            match element_dual_row(mesh, net, &mass_diag, elem, mesh_node, &mut worst_cond) {
                Some(row) => contributions.push(row),
                None => last_singular = elem,
            }
        }
        if contributions.is_empty() {
            return Err(Error::SingularGram {
                element: last_singular,
            });
        }
        let scale = 1.0 / contributions.len() as f64;
        for row in contributions {
            for (node, w) in row {
                f_triplets.push((rank, node, scale * w));
            }
        }
    }
    let functionals = CsrMatrix::from_triplets(mesh.n_free(), n, &f_triplets);

    Ok(Interpolator {
        functionals,
        prolongation,
        averaging,
        worst_gram_condition: worst_cond,
    })
}

/// Functional row of coarse node `j` from element `elem`:
/// `v -> sum_{x in N(T)} m_x psi_j(x) v(x)` with `psi_j` the dual vector.
fn element_dual_row(
    mesh: &CoarseMesh,
    net: &Network,
    mass_diag: &[f64],
    elem: usize,
    mesh_node: usize,
    worst_cond: &mut f64,
) -> Option<Vec<(usize, f64)>> {
    let corners = mesh.element_corner_ids(elem);
    let nodes = mesh.element_nodes(elem);
    let nc = corners.len();
    let local = corners.iter().position(|&c| c == mesh_node)?;

    // Basis values per node and the Gram matrix G[a][b] = (M_T phi_a, phi_b).
    let mut phi = vec![vec![0.0; nc]; nodes.len()];
    for (ni, &node) in nodes.iter().enumerate() {
        for (ci, &corner) in corners.iter().enumerate() {
            phi[ni][ci] = mesh.basis_value(corner, net.coord(node));
        }
    }
    let mut gram = nalgebra::DMatrix::zeros(nc, nc);
    for (ni, &node) in nodes.iter().enumerate() {
        let m = mass_diag[node];
        for a in 0..nc {
            if phi[ni][a] == 0.0 {
                continue;
            }
            for b in 0..nc {
                gram[(a, b)] += m * phi[ni][a] * phi[ni][b];
            }
        }
    }

    let lu = gram.clone().full_piv_lu();
    let diag: Vec<f64> = lu.u().diagonal().iter().copied().collect();
    let max_pivot = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let min_pivot = diag.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
    if !(max_pivot > 0.0) || min_pivot <= GRAM_PIVOT_RTOL * max_pivot {
        return None;
    }
    *worst_cond = worst_cond.max(max_pivot / min_pivot);

    let mut rhs = nalgebra::DVector::zeros(nc);
    rhs[local] = 1.0;
    let dual = lu.solve(&rhs)?;

    let mut row = Vec::with_capacity(nodes.len());
    for (ni, &node) in nodes.iter().enumerate() {
        let psi: f64 = (0..nc).map(|c| dual[c] * phi[ni][c]).sum();
        let w = mass_diag[node] * psi;
        if w != 0.0 {
            row.push((node, w));
        }
    }
    Some(row)
}

impl Interpolator {
    /// Number of free coarse nodes.
    pub fn n_coarse(&self) -> usize {
        self.functionals.n_rows()
    }

    pub fn n_fine(&self) -> usize {
        self.prolongation.n_rows()
    }

    pub fn averaging(&self) -> bool {
        self.averaging
    }

    pub fn worst_gram_condition(&self) -> f64 {
        self.worst_gram_condition
    }

    /// Functional matrix (m0 x n_nodes).
    pub fn functionals(&self) -> &CsrMatrix {
        &self.functionals
    }

    /// Prolongation matrix (n_nodes x m0).
    pub fn prolongation(&self) -> &CsrMatrix {
        &self.prolongation
    }

    /// Coarse nodal values of the interpolant of a full-node vector.
    pub fn interpolate(&self, v: &[f64]) -> Vec<f64> {
        self.functionals.apply_vec(v)
    }

    /// Evaluates `sum_j c_j phi_j` at every network node.
    pub fn prolong(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        if coarse.len() != self.n_coarse() {
            return Err(Error::DimensionMismatch {
                expected: self.n_coarse(),
                got: coarse.len(),
            });
        }
        Ok(self.prolongation.apply_vec(coarse))
    }

    /// Interpolant as a fine-node vector: prolong(interpolate(v)).
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_fine() {
            return Err(Error::DimensionMismatch {
                expected: self.n_fine(),
                got: v.len(),
            });
        }
        self.prolong(&self.interpolate(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse_fem::build_mesh;
    use crate::network::{generate_fiber_network, grid_network, GeneratorConfig};
    use crate::operators::assemble_mass;
    use crate::rng;

    fn setup(total_length: f64, seed: u64, level: u32) -> (crate::network::Network, CoarseMesh, Interpolator) {
        let net = generate_fiber_network(&GeneratorConfig::new(total_length, seed))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)
            .unwrap();
        let mesh = build_mesh(&net, level).unwrap();
        let mass = assemble_mass(&net, 1).unwrap();
        let interp = build_interpolator(&mesh, &net, &mass, true).unwrap();
        (net, mesh, interp)
    }

    #[test]
    fn projection_on_coarse_vectors() {
        let (_, mesh, interp) = setup(100.0, 1, 2);
        let mut rng = rng::stream(9, "test-proj");
        for _ in 0..20 {
            let c = rng::uniform_vector(&mut rng, mesh.n_free());
            let fine = interp.prolong(&c).unwrap();
            let back = interp.interpolate(&fine);
            let err = c
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-10, "projection defect {err}");
        }
    }

    #[test]
    fn projection_without_averaging_too() {
        let net = generate_fiber_network(&GeneratorConfig::new(100.0, 1))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)
            .unwrap();
        let mesh = build_mesh(&net, 2).unwrap();
        let mass = assemble_mass(&net, 1).unwrap();
        let interp = build_interpolator(&mesh, &net, &mass, false).unwrap();
        let mut rng = rng::stream(10, "test-proj2");
        let c = rng::uniform_vector(&mut rng, mesh.n_free());
        let back = interp.interpolate(&interp.prolong(&c).unwrap());
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn indicator_support_is_local() {
        let (net, mesh, interp) = setup(100.0, 1, 2);
        // Indicator of one interior network node touches only coarse nodes
        // whose support contains that node's element.
        let node = (0..net.n_nodes())
            .find(|&i| {
                let c = net.coord(i);
                c[0] > 0.3 && c[0] < 0.7 && c[1] > 0.3 && c[1] < 0.7
            })
            .unwrap();
        let mut v = vec![0.0; net.n_nodes()];
        v[node] = 1.0;
        let coarse = interp.interpolate(&v);
        let elem = mesh.element_of_node(node);
        for (rank, &val) in coarse.iter().enumerate() {
            if val.abs() > 0.0 {
                let mesh_node = mesh.free_nodes()[rank];
                let support = mesh.support_elements(mesh_node);
                assert!(
                    support.contains(&elem),
                    "functional {rank} saw a node outside its support"
                );
            }
        }
    }

    #[test]
    fn prolongation_reproduces_linear_coordinate() {
        // Bilinear elements reproduce x1 exactly: set coarse coefficients to
        // the x1-coordinates of free mesh nodes on a network with free
        // columns only (grid with Dirichlet at x in {0,1} excludes the
        // boundary columns, where x1 is 0 or 1, so interior reproduction
        // still holds away from constrained faces).
        let net = grid_network(4).assign_boundary(|x| x[0] == 0.0).unwrap();
        let mesh = build_mesh(&net, 1).unwrap();
        let mass = assemble_mass(&net, 1).unwrap();
        let interp = build_interpolator(&mesh, &net, &mass, true).unwrap();
        let coeffs: Vec<f64> = mesh
            .free_nodes()
            .iter()
            .map(|&id| mesh.mesh_node_coord(id)[0])
            .collect();
        let fine = interp.prolong(&coeffs).unwrap();
        for node in 0..net.n_nodes() {
            let x = net.coord(node)[0];
            assert!(
                (fine[node] - x).abs() < 1e-12,
                "bilinear reproduction failed at x = {x}: {}",
                fine[node]
            );
        }
    }

    #[test]
    fn basis_values_lie_in_unit_interval() {
        let (_, mesh, interp) = setup(100.0, 2, 2);
        let mut c = vec![0.0; mesh.n_free()];
        c[mesh.n_free() / 2] = 1.0;
        let fine = interp.prolong(&c).unwrap();
        for v in fine {
            assert!((-1e-14..=1.0 + 1e-14).contains(&v));
        }
    }
}
