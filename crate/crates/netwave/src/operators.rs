//! Assembly of the network operators: the diagonal mass `M`, the reciprocal
//! edge-length weighted graph Laplacian `L`, scalar stiffness operators with
//! per-edge coefficients, and the three-component elastic stiffness
//! `K = KE + KB(1) + KB(2)`.
//!
//! Operators are assembled on the full node set (all components) and can be
//! restricted to free degrees of freedom by eliminating Dirichlet rows and
//! columns. Degrees of freedom are ordered node-major, component-minor.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::network::Network;
use crate::rng;

/// Mapping between network nodes and matrix indices after Dirichlet
/// elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    components: usize,
    /// Free-node rank for each network node (None for Dirichlet nodes).
    node_rank: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
}

impl DofMap {
    pub fn new(net: &Network, components: usize) -> Self {
        let free_nodes = net.free_nodes();
        let mut node_rank = vec![None; net.n_nodes()];
        for (rank, &node) in free_nodes.iter().enumerate() {
            node_rank[node] = Some(rank);
        }
        DofMap {
            components,
            node_rank,
            free_nodes,
        }
    }

    /// Identity map over all nodes (no elimination).
    pub fn unconstrained(n_nodes: usize, components: usize) -> Self {
        DofMap {
            components,
            node_rank: (0..n_nodes).map(Some).collect(),
            free_nodes: (0..n_nodes).collect(),
        }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_dofs(&self) -> usize {
        self.free_nodes.len() * self.components
    }

    pub fn n_free_nodes(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        debug_assert!(component < self.components);
        self.node_rank[node].map(|r| r * self.components + component)
    }

    pub fn node_of_dof(&self, dof: usize) -> (usize, usize) {
        (self.free_nodes[dof / self.components], dof % self.components)
    }

    /// Restricts a full-node vector (node-major, component-minor over all
    /// nodes) to free DOFs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_dofs());
        for &node in &self.free_nodes {
            for c in 0..self.components {
                out.push(full[node * self.components + c]);
            }
        }
        out
    }

    /// Extends a free-DOF vector to all nodes, zero on Dirichlet nodes.
    pub fn extend(&self, reduced: &[f64], n_nodes: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_nodes * self.components];
        for (rank, &node) in self.free_nodes.iter().enumerate() {
            for c in 0..self.components {
                out[node * self.components + c] = reduced[rank * self.components + c];
            }
        }
        out
    }
}

/// A symmetric sparse operator with optional Dirichlet elimination metadata.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    matrix: CsrMatrix,
    components: usize,
    dof_map: Option<DofMap>,
}

impl SparseOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dof_map(&self) -> Option<&DofMap> {
        self.dof_map.as_ref()
    }

    pub fn is_constrained(&self) -> bool {
        self.dof_map.is_some()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.apply_vec(x)
    }

    /// Quadratic form `(A v, v)`.
    pub fn quad(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(self.matrix.quad(v))
    }

    /// Norm `(A v, v)^{1/2}`; clamps tiny negative round-off to zero.
    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        Ok(self.quad(v)?.max(0.0).sqrt())
    }

    /// Diagonal entries when the operator is diagonal (the mass operator).
    pub fn diagonal(&self) -> Option<Vec<f64>> {
        if self.matrix.nnz() != self.dim() {
            return None;
        }
        Some((0..self.dim()).map(|i| self.matrix.get(i, i)).collect())
    }

    /// Eliminates Dirichlet rows and columns, producing the operator on free
    /// DOFs with an attached [`DofMap`].
    pub fn eliminate_boundary(&self, net: &Network) -> SparseOperator {
        assert!(
            self.dof_map.is_none(),
            "operator is already Dirichlet-eliminated"
        );
        let map = DofMap::new(net, self.components);
        let keep: Vec<usize> = map
            .free_nodes()
            .iter()
            .flat_map(|&node| (0..self.components).map(move |c| node * self.components + c))
            .collect();
        SparseOperator {
            matrix: self.matrix.principal_submatrix(&keep),
            components: self.components,
            dof_map: Some(map),
        }
    }
}

/// Assembles the diagonal mass operator: entry `(x, c)` is half the total
/// length of edges incident to `x`, replicated per component. Errors on
/// isolated nodes (zero diagonal).
pub fn assemble_mass(net: &Network, components: usize) -> Result<SparseOperator> {
    assert!(components == 1 || components == 3, "components must be 1 or 3");
    let n = net.n_nodes();
    let mut diag = Vec::with_capacity(n * components);
    for x in 0..n {
        let m = net.node_mass(x);
        if m <= 0.0 {
            return Err(Error::InvalidNetwork(format!(
                "isolated node {x}: zero mass diagonal"
            )));
        }
        for _ in 0..components {
            diag.push(m);
        }
    }
    Ok(SparseOperator {
        matrix: CsrMatrix::from_diagonal(&diag),
        components,
        dof_map: None,
    })
}

/// Assembles the reciprocal edge-length weighted graph Laplacian:
/// `(Lv, v) = sum_edges (v(x) - v(y))^2 / |x - y|`.
pub fn assemble_graph_laplacian(net: &Network) -> Result<SparseOperator> {
    assemble_scalar_stiffness(net, &vec![1.0; net.n_edges()])
}

/// Componentwise replication of the graph Laplacian for vector problems.
pub fn assemble_graph_laplacian_vector(net: &Network, components: usize) -> Result<SparseOperator> {
    let scalar = assemble_graph_laplacian(net)?;
    Ok(replicate_components(&scalar, components))
}

/// Componentwise replication of the scalar operator over `components`.
pub fn replicate_components(op: &SparseOperator, components: usize) -> SparseOperator {
    assert_eq!(op.components, 1);
    assert!(op.dof_map.is_none());
    let m = op.matrix();
    let mut triplets = Vec::with_capacity(m.nnz() * components);
    for r in 0..m.n_rows() {
        let (cols, vals) = m.row(r);
        for (c, v) in cols.iter().zip(vals) {
            for comp in 0..components {
                triplets.push((r * components + comp, *c * components + comp, *v));
            }
        }
    }
    SparseOperator {
        matrix: CsrMatrix::from_triplets(
            m.n_rows() * components,
            m.n_cols() * components,
            &triplets,
        ),
        components,
        dof_map: None,
    }
}

/// Scalar stiffness: weighted Laplacian with per-edge coefficient
/// `gamma[e] / |x - y|`. Coefficients must be positive.
pub fn assemble_scalar_stiffness(net: &Network, gamma: &[f64]) -> Result<SparseOperator> {
    if gamma.len() != net.n_edges() {
        return Err(Error::DimensionMismatch {
            expected: net.n_edges(),
            got: gamma.len(),
        });
    }
    let triplets = scalar_stiffness_triplets(net, gamma, None)?;
    Ok(SparseOperator {
        matrix: CsrMatrix::from_triplets(net.n_nodes(), net.n_nodes(), &triplets),
        components: 1,
        dof_map: None,
    })
}

/// Scalar stiffness restricted to centers: `K_T = sum_{x in centers} K_x`.
/// The node-restricted sums over all elements of a partition add back to the
/// full operator.
pub fn assemble_scalar_stiffness_restricted(
    net: &Network,
    gamma: &[f64],
    centers: &[usize],
) -> Result<SparseOperator> {
    let triplets = scalar_stiffness_triplets(net, gamma, Some(centers))?;
    Ok(SparseOperator {
        matrix: CsrMatrix::from_triplets(net.n_nodes(), net.n_nodes(), &triplets),
        components: 1,
        dof_map: None,
    })
}

fn scalar_stiffness_triplets(
    net: &Network,
    gamma: &[f64],
    centers: Option<&[usize]>,
) -> Result<Vec<(usize, usize, f64)>> {
    if let Some(pos) = gamma.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::Invalid(format!(
            "stiffness coefficient {} on edge {} must be positive",
            gamma[pos], pos
        )));
    }
    let owned_centers: Vec<usize>;
    let centers = match centers {
        Some(c) => c,
        None => {
            owned_centers = (0..net.n_nodes()).collect();
            &owned_centers
        }
    };
    let mut triplets = Vec::new();
    for &x in centers {
        for &(y, eid) in net.neighbors(x) {
            let len = net.edge_length()[eid];
            if len <= 0.0 {
                return Err(Error::InvalidNetwork(format!("zero-length edge {eid}")));
            }
            // K_x carries half the edge form; summing over both endpoints
            // restores the full edge contribution.
            let w = 0.5 * gamma[eid] / len;
            triplets.push((x, x, w));
            triplets.push((y, y, w));
            triplets.push((x, y, -w));
            triplets.push((y, x, -w));
        }
    }
    Ok(triplets)
}

/// Draws per-edge coefficients uniformly from `[lo, hi)` using the seeded
/// `"gamma"` stream, in edge order.
pub fn random_edge_coefficients(net: &Network, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "gamma");
    (0..net.n_edges())
        .map(|_| rng::uniform_in(&mut rng, lo, hi))
        .collect()
}

/// Material parameters of the elastic wire model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Wire radius (m).
    pub wire_radius: f64,
}

impl ElasticParams {
    pub fn new(youngs_modulus: f64, wire_radius: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0 && wire_radius > 0.0) {
            return Err(Error::Config(
                "Young's modulus and wire radius must be positive".into(),
            ));
        }
        Ok(ElasticParams {
            youngs_modulus,
            wire_radius,
        })
    }

    /// Cross-section area `A = pi r_w^2`.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.wire_radius * self.wire_radius
    }

    /// Second moment of area `I = 0.25 pi r_w^4 = 0.25 A r_w^2`.
    pub fn second_moment(&self) -> f64 {
        0.25 * self.area() * self.wire_radius * self.wire_radius
    }

    /// Axial stiffness coefficient `E A`.
    pub fn gamma_ke(&self) -> f64 {
        self.youngs_modulus * self.area()
    }

    /// Bending coefficient `E I (|x-y| + |x-z|)^{-2}`.
    pub fn gamma_bend(&self, len_xy: f64, len_xz: f64) -> f64 {
        let s = len_xy + len_xz;
        self.youngs_modulus * self.second_moment() / (s * s)
    }
}

/// Whether the bending sum runs over ordered neighbor pairs, as the model is
/// written, or over unordered pairs (half the ordered value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairConvention {
    #[default]
    Ordered,
    Unordered,
}

/// Assembles the three-component elastic stiffness on a planar network:
/// axial springs along edges plus in-plane and out-of-plane bending at each
/// node over neighbor pairs.
pub fn assemble_elastic_stiffness(
    net: &Network,
    params: &ElasticParams,
    convention: PairConvention,
) -> Result<SparseOperator> {
    let triplets = elastic_triplets(net, params, convention, None)?;
    Ok(SparseOperator {
        matrix: CsrMatrix::from_triplets(3 * net.n_nodes(), 3 * net.n_nodes(), &triplets),
        components: 3,
        dof_map: None,
    })
}

/// Elastic stiffness restricted to center nodes, `K_T = sum_{x in centers} K_x`.
pub fn assemble_elastic_stiffness_restricted(
    net: &Network,
    params: &ElasticParams,
    convention: PairConvention,
    centers: &[usize],
) -> Result<SparseOperator> {
    let triplets = elastic_triplets(net, params, convention, Some(centers))?;
    Ok(SparseOperator {
        matrix: CsrMatrix::from_triplets(3 * net.n_nodes(), 3 * net.n_nodes(), &triplets),
        components: 3,
        dof_map: None,
    })
}

fn elastic_triplets(
    net: &Network,
    params: &ElasticParams,
    convention: PairConvention,
    centers: Option<&[usize]>,
) -> Result<Vec<(usize, usize, f64)>> {
    if net.dim() != 2 {
        return Err(Error::Invalid(
            "elastic operator requires a planar (d = 2) network".into(),
        ));
    }
    let owned_centers: Vec<usize>;
    let centers = match centers {
        Some(c) => c,
        None => {
            owned_centers = (0..net.n_nodes()).collect();
            &owned_centers
        }
    };
    let gamma_ke = params.gamma_ke();
    let pair_scale = match convention {
        PairConvention::Ordered => 1.0,
        PairConvention::Unordered => 0.5,
    };
    let mut triplets = Vec::new();

    for &x in centers {
        let cx = net.coord(x);
        let nbrs = net.neighbors(x);

        // Axial part: 1/2 gamma_KE ((v(x)-v(y))^T d_xy)^2 / |x-y| per side.
        for &(y, eid) in nbrs {
            let len = net.edge_length()[eid];
            let cy = net.coord(y);
            let dir = [(cx[0] - cy[0]) / len, (cx[1] - cy[1]) / len, 0.0];
            let w = 0.5 * gamma_ke / len;
            // Rank-one block (d d^T) on (x, x), (y, y), -(x, y), -(y, x).
            for a in 0..3 {
                for b in 0..3 {
                    let v = w * dir[a] * dir[b];
                    if v != 0.0 {
                        triplets.push((3 * x + a, 3 * x + b, v));
                        triplets.push((3 * y + a, 3 * y + b, v));
                        triplets.push((3 * x + a, 3 * y + b, -v));
                        triplets.push((3 * y + a, 3 * x + b, -v));
                    }
                }
            }
        }

        // Bending: ordered neighbor pairs (y, z), y != z, with directions
        // eta out of plane (k = 2) and e_z x d (k = 1).
        for (iy, &(y, ey)) in nbrs.iter().enumerate() {
            let len_y = net.edge_length()[ey];
            let cy = net.coord(y);
            let dy = [(cx[0] - cy[0]) / len_y, (cx[1] - cy[1]) / len_y];
            for &(z, ez) in nbrs.iter().skip(iy + 1) {
                let len_z = net.edge_length()[ez];
                let cz = net.coord(z);
                let dz = [(cx[0] - cz[0]) / len_z, (cx[1] - cz[1]) / len_z];
                let gamma = params.gamma_bend(len_y, len_z);
                // Ordered pairs (y,z) and (z,y) give identical forms, so the
                // ordered sum is twice the unordered one.
                let weight = 2.0 * pair_scale * gamma * 0.5 * (len_y + len_z);

                // k = 2: eta^y = eta^z = e_z.
                let eta_y2 = [0.0, 0.0, 1.0];
                let eta_z2 = [0.0, 0.0, 1.0];
                push_bending(&mut triplets, x, y, z, len_y, len_z, &eta_y2, &eta_z2, weight);

                // k = 1: eta^y = e_z x d_xy, eta^z = e_z x d_xz.
                let eta_y1 = [-dy[1], dy[0], 0.0];
                let eta_z1 = [-dz[1], dz[0], 0.0];
                push_bending(&mut triplets, x, y, z, len_y, len_z, &eta_y1, &eta_z1, weight);
            }
        }
    }
    Ok(triplets)
}

/// Adds `weight * l(v) l(w)` where
/// `l(v) = (v(y)-v(x))^T eta_y / len_y + (v(z)-v(x))^T eta_z / len_z`.
#[allow(clippy::too_many_arguments)]
fn push_bending(
    triplets: &mut Vec<(usize, usize, f64)>,
    x: usize,
    y: usize,
    z: usize,
    len_y: f64,
    len_z: f64,
    eta_y: &[f64; 3],
    eta_z: &[f64; 3],
    weight: f64,
) {
    // Coefficient vector over stacked (v(x), v(y), v(z)).
    let mut coeff = [[0.0f64; 3]; 3];
    for a in 0..3 {
        coeff[1][a] = eta_y[a] / len_y;
        coeff[2][a] = eta_z[a] / len_z;
        coeff[0][a] = -coeff[1][a] - coeff[2][a];
    }
    let nodes = [x, y, z];
    for (bi, &ni) in nodes.iter().enumerate() {
        for a in 0..3 {
            let ci = coeff[bi][a];
            if ci == 0.0 {
                continue;
            }
            for (bj, &nj) in nodes.iter().enumerate() {
                for b in 0..3 {
                    let cj = coeff[bj][b];
                    if cj != 0.0 {
                        triplets.push((3 * ni + a, 3 * nj + b, weight * ci * cj));
                    }
                }
            }
        }
    }
}

/// The stiffness model of an experiment: scalar per-edge coefficients or the
/// elastic wire model.
#[derive(Debug, Clone)]
pub enum StiffnessModel {
    Scalar { gamma: Vec<f64> },
    Elastic {
        params: ElasticParams,
        convention: PairConvention,
    },
}

impl StiffnessModel {
    pub fn components(&self) -> usize {
        match self {
            StiffnessModel::Scalar { .. } => 1,
            StiffnessModel::Elastic { .. } => 3,
        }
    }

    pub fn assemble(&self, net: &Network) -> Result<SparseOperator> {
        match self {
            StiffnessModel::Scalar { gamma } => assemble_scalar_stiffness(net, gamma),
            StiffnessModel::Elastic { params, convention } => {
                assemble_elastic_stiffness(net, params, *convention)
            }
        }
    }

    /// Node-restricted stiffness `K_T = sum_{x in centers} K_x`.
    pub fn assemble_restricted(&self, net: &Network, centers: &[usize]) -> Result<SparseOperator> {
        match self {
            StiffnessModel::Scalar { gamma } => {
                assemble_scalar_stiffness_restricted(net, gamma, centers)
            }
            StiffnessModel::Elastic { params, convention } => {
                assemble_elastic_stiffness_restricted(net, params, *convention, centers)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::three_node_path;

    #[test]
    fn mass_diagonal_on_path() {
        // Hand evaluation of (M_x 1, 1) = 1/2 sum |x-y|.
        let net = three_node_path();
        let m = assemble_mass(&net, 1).unwrap();
        assert_eq!(m.diagonal().unwrap(), vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn mass_norm_of_one_is_total_length() {
        let net = three_node_path();
        let m = assemble_mass(&net, 1).unwrap();
        let ones = vec![1.0; 3];
        assert!((m.quad(&ones).unwrap() - net.total_edge_length()).abs() < 1e-14);
        // |v|_M^2 = 0.5 for the middle hat.
        assert!((m.quad(&[0.0, 1.0, 0.0]).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(m.norm(&[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let net = three_node_path();
        let l = assemble_graph_laplacian(&net).unwrap();
        let out = l.apply(&[1.0, 1.0, 1.0]);
        assert!(out.iter().all(|v| v.abs() < 1e-14));
        // Hand value: (Lv, v) = 1/0.5 + 1/0.5 = 4 for the middle hat.
        assert!((l.quad(&[0.0, 1.0, 0.0]).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn single_edge_laplacian() {
        let net = Network::new(2, vec![0.0, 0.0, 0.25, 0.0], vec![[0, 1]], &[0]).unwrap();
        let l = assemble_graph_laplacian(&net).unwrap();
        assert!((l.quad(&[0.0, 1.0]).unwrap() - 1.0 / 0.25).abs() < 1e-14);
    }

    #[test]
    fn unit_coefficients_reduce_stiffness_to_laplacian() {
        let net = three_node_path();
        let l = assemble_graph_laplacian(&net).unwrap();
        let k = assemble_scalar_stiffness(&net, &[1.0, 1.0]).unwrap();
        assert_eq!(l.matrix(), k.matrix());
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        let net = three_node_path();
        assert!(assemble_scalar_stiffness(&net, &[0.5, 0.0]).is_err());
        assert!(assemble_scalar_stiffness(&net, &[0.5, -1.0]).is_err());
    }

    #[test]
    fn restricted_centers_sum_to_full_operator() {
        let net = three_node_path();
        let gamma = vec![0.3, 0.8];
        let full = assemble_scalar_stiffness(&net, &gamma).unwrap();
        let part0 = assemble_scalar_stiffness_restricted(&net, &gamma, &[0, 1]).unwrap();
        let part1 = assemble_scalar_stiffness_restricted(&net, &gamma, &[2]).unwrap();
        let sum = part0.matrix().add_scaled(part1.matrix(), 1.0);
        let v = [0.3, -0.7, 1.1];
        assert!((sum.quad(&v) - full.matrix().quad(&v)).abs() < 1e-14);
    }

    #[test]
    fn elimination_commutes_with_assembly() {
        let net = three_node_path();
        let gamma = vec![0.4, 0.9];
        let full = assemble_scalar_stiffness(&net, &gamma).unwrap();
        let eliminated = full.eliminate_boundary(&net);
        // Only the middle node is free: K_ff = gamma0/0.5 + gamma1/0.5.
        assert_eq!(eliminated.dim(), 1);
        let expected = 0.4 / 0.5 + 0.9 / 0.5;
        assert!((eliminated.matrix().get(0, 0) - expected).abs() < 1e-14);
    }

    #[test]
    fn elastic_annihilates_translations() {
        let net = three_node_path();
        let params = ElasticParams::new(1.0, 0.5).unwrap();
        let k = assemble_elastic_stiffness(&net, &params, PairConvention::Ordered).unwrap();
        for c in 0..3 {
            let mut v = vec![0.0; 3 * net.n_nodes()];
            for node in 0..net.n_nodes() {
                v[3 * node + c] = 1.0;
            }
            assert!(
                k.quad(&v).unwrap().abs() < 1e-12,
                "translation {c} not annihilated"
            );
        }
    }

    #[test]
    fn elastic_matches_brute_force_on_chain() {
        // 3 collinear nodes, unit-ish spacing, coefficients from the model;
        // oracle evaluates the defining quadratic forms directly.
        let net = Network::new(
            2,
            vec![0.0, 0.5, 0.5, 0.5, 1.0, 0.5],
            vec![[0, 1], [1, 2]],
            &[0],
        )
        .unwrap();
        let params = ElasticParams::new(2.0, 0.3).unwrap();
        let k = assemble_elastic_stiffness(&net, &params, PairConvention::Ordered).unwrap();
        let mut rng = crate::rng::stream(42, "test-elastic");
        for _ in 0..50 {
            let v = crate::rng::uniform_vector(&mut rng, 9);
            let assembled = k.quad(&v).unwrap();
            let direct = brute_force_elastic(&net, &params, &v);
            let scale = assembled.abs().max(direct.abs()).max(1e-30);
            assert!(
                (assembled - direct).abs() <= 1e-12 * scale,
                "assembled {assembled} vs direct {direct}"
            );
        }
    }

    #[test]
    fn unordered_convention_halves_bending() {
        let net = three_node_path();
        let params = ElasticParams::new(1.0, 0.4).unwrap();
        let ordered = assemble_elastic_stiffness(&net, &params, PairConvention::Ordered).unwrap();
        let unordered =
            assemble_elastic_stiffness(&net, &params, PairConvention::Unordered).unwrap();
        // Out-of-plane bending mode: axial part zero, bending halves.
        let v = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let qo = ordered.quad(&v).unwrap();
        let qu = unordered.quad(&v).unwrap();
        assert!(qo > 0.0);
        assert!((qu - 0.5 * qo).abs() < 1e-12 * qo);
    }

    /// Independent evaluation of the elastic energy from the defining sums.
    pub(crate) fn brute_force_elastic(net: &Network, p: &ElasticParams, v: &[f64]) -> f64 {
        let vv = |node: usize| [v[3 * node], v[3 * node + 1], v[3 * node + 2]];
        let mut total = 0.0;
        for x in 0..net.n_nodes() {
            let cx = net.coord(x);
            // KE_x
            for &(y, ey) in net.neighbors(x) {
                let len = net.edge_length()[ey];
                let cy = net.coord(y);
                let d = [(cx[0] - cy[0]) / len, (cx[1] - cy[1]) / len, 0.0];
                let diff = [
                    vv(x)[0] - vv(y)[0],
                    vv(x)[1] - vv(y)[1],
                    vv(x)[2] - vv(y)[2],
                ];
                let proj = diff[0] * d[0] + diff[1] * d[1] + diff[2] * d[2];
                total += 0.5 * p.gamma_ke() * proj * proj / len;
            }
            // KB_x over ordered pairs
            for &(y, ey) in net.neighbors(x) {
                for &(z, ez) in net.neighbors(x) {
                    if y == z {
                        continue;
                    }
                    let ly = net.edge_length()[ey];
                    let lz = net.edge_length()[ez];
                    let cy = net.coord(y);
                    let cz = net.coord(z);
                    let dy = [(cx[0] - cy[0]) / ly, (cx[1] - cy[1]) / ly];
                    let dz = [(cx[0] - cz[0]) / lz, (cx[1] - cz[1]) / lz];
                    let gamma = p.gamma_bend(ly, lz);
                    let w = gamma * (ly + lz) / 2.0;
                    let dvy = [vv(y)[0] - vv(x)[0], vv(y)[1] - vv(x)[1], vv(y)[2] - vv(x)[2]];
                    let dvz = [vv(z)[0] - vv(x)[0], vv(z)[1] - vv(x)[1], vv(z)[2] - vv(x)[2]];
                    // k = 2
                    let l2 = dvy[2] / ly + dvz[2] / lz;
                    total += w * l2 * l2;
                    // k = 1
                    let ey1 = [-dy[1], dy[0]];
                    let ez1 = [-dz[1], dz[0]];
                    let l1 = (dvy[0] * ey1[0] + dvy[1] * ey1[1]) / ly
                        + (dvz[0] * ez1[0] + dvz[1] * ez1[1]) / lz;
                    total += w * l1 * l1;
                }
            }
        }
        total
    }

    #[test]
    fn elastic_params_derived_quantities() {
        let p = ElasticParams::new(210e9, 5e-4).unwrap();
        assert!((p.second_moment() - 0.25 * p.area() * 5e-4 * 5e-4).abs() < 1e-30);
        // E*A for the steel wire of the elastic model; the derived value.
        assert!((p.gamma_ke() - 210e9 * std::f64::consts::PI * 2.5e-7).abs() < 1.0);
    }
}
