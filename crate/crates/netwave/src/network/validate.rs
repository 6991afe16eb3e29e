//! Numerical checks of the network homogeneity, connectivity, locality, and
//! boundary density properties on a grid of box radii.

use super::generate::nodes_in_box;
use super::geometry::box_contains;
use super::Network;

/// Outcome of [`validate_assumptions`]. A pure function of the network and
/// the sampling parameters; failures are carried in the report rather than
/// raised as errors.
#[derive(Debug, Clone)]
pub struct NetworkQualityReport {
    pub max_edge_length: f64,
    /// Worst distance from sampled boundary-face points to the nearest
    /// Dirichlet node (infinite when Γ is empty).
    pub boundary_gap: f64,
    pub per_radius: Vec<RadiusCheck>,
    /// Smallest tested radius at which locality, boundary density and
    /// connectivity all hold.
    pub r0_estimate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RadiusCheck {
    pub radius: f64,
    /// Extremes over sampled centers of the box density
    /// `(2R)^{-d} |1|^2_{M, B_R(x)}`.
    pub density_min: f64,
    pub density_max: f64,
    /// Uniformity ratio `density_max / density_min`.
    pub sigma_ratio: f64,
    /// Per sampled center: edges touching the box connect inside the doubled
    /// box (one-layer relaxation of the connectivity assumption).
    pub connectivity_ok: Vec<bool>,
    pub locality_ok: bool,
    pub boundary_ok: bool,
}

impl RadiusCheck {
    pub fn all_connected(&self) -> bool {
        self.connectivity_ok.iter().all(|ok| *ok)
    }
}

/// Evaluates the network property checks over `r_grid`, sampling
/// `sample_centers` box centers from a uniform lattice.
pub fn validate_assumptions(
    net: &Network,
    r_grid: &[f64],
    sample_centers: usize,
) -> NetworkQualityReport {
    let d = net.dim();
    let max_edge = net.max_edge_length();
    let mass: Vec<f64> = (0..net.n_nodes()).map(|i| net.node_mass(i)).collect();
    let centers = lattice_centers(d, sample_centers);
    let boundary_gap = boundary_gap(net, sample_centers.max(16));

    let mut radii: Vec<f64> = r_grid.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let per_radius: Vec<RadiusCheck> = radii
        .iter()
        .map(|&radius| {
            let mut density_min = f64::INFINITY;
            let mut density_max: f64 = 0.0;
            let mut connectivity_ok = Vec::with_capacity(centers.len());
            for center in &centers {
                let inside = nodes_in_box(net, center, radius);
                let box_mass: f64 = inside.iter().map(|&i| mass[i]).sum();
                let density = box_mass / (2.0 * radius).powi(d as i32);
                density_min = density_min.min(density);
                density_max = density_max.max(density);
                connectivity_ok.push(box_connected(net, center, radius));
            }
            RadiusCheck {
                radius,
                density_min,
                density_max,
                sigma_ratio: if density_min > 0.0 {
                    density_max / density_min
                } else {
                    f64::INFINITY
                },
                connectivity_ok,
                locality_ok: max_edge < radius,
                boundary_ok: boundary_gap < radius,
            }
        })
        .collect();

    let r0_estimate = per_radius
        .iter()
        .find(|c| c.locality_ok && c.boundary_ok && c.all_connected())
        .map(|c| c.radius);

    NetworkQualityReport {
        max_edge_length: max_edge,
        boundary_gap,
        per_radius,
        r0_estimate,
    }
}

fn lattice_centers(d: usize, count: usize) -> Vec<Vec<f64>> {
    if count == 0 {
        return vec![vec![0.5; d]];
    }
    let per_dim = (count as f64).powf(1.0 / d as f64).ceil().max(1.0) as usize;
    let mut centers = Vec::with_capacity(count);
    let mut idx = vec![0usize; d];
    'outer: loop {
        centers.push(
            idx.iter()
                .map(|&i| (i as f64 + 0.5) / per_dim as f64)
                .collect(),
        );
        if centers.len() == count {
            break;
        }
        let mut dim = 0;
        loop {
            idx[dim] += 1;
            if idx[dim] < per_dim {
                break;
            }
            idx[dim] = 0;
            dim += 1;
            if dim == d {
                break 'outer;
            }
        }
    }
    centers
}

/// All edges with an endpoint in `B_R(x)` must lie in one connected component
/// of the subgraph induced on `B_{2R}(x)`.
fn box_connected(net: &Network, center: &[f64], radius: f64) -> bool {
    let mut target_edges = Vec::new();
    let mut outer_nodes = Vec::new();
    let mut outer_mark = vec![false; net.n_nodes()];
    for i in 0..net.n_nodes() {
        if box_contains(center, 2.0 * radius, net.coord(i)) {
            outer_mark[i] = true;
            outer_nodes.push(i);
        }
    }
    for (eid, e) in net.edges().iter().enumerate() {
        let a_in = box_contains(center, radius, net.coord(e[0]));
        let b_in = box_contains(center, radius, net.coord(e[1]));
        if a_in || b_in {
            if !outer_mark[e[0]] || !outer_mark[e[1]] {
                return false; // edge escapes even the doubled box
            }
            target_edges.push(eid);
        }
    }
    if target_edges.is_empty() {
        return true;
    }
    // BFS restricted to the doubled box from one target endpoint.
    let start = net.edges()[target_edges[0]][0];
    let mut visited = vec![false; net.n_nodes()];
    visited[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &(w, _) in net.neighbors(v) {
            if outer_mark[w] && !visited[w] {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    target_edges
        .iter()
        .all(|&eid| visited[net.edges()[eid][0]] && visited[net.edges()[eid][1]])
}

/// Maximum, over sampled points of the square faces carrying Dirichlet nodes,
/// of the distance to the nearest Dirichlet node.
fn boundary_gap(net: &Network, samples_per_face: usize) -> f64 {
    let d = net.dim();
    let boundary = net.boundary_nodes();
    if boundary.is_empty() {
        return f64::INFINITY;
    }
    let mut gap: f64 = 0.0;
    for dim in 0..d {
        for &face_val in &[0.0, 1.0] {
            let on_face: Vec<&usize> = boundary
                .iter()
                .filter(|&&b| (net.coord(b)[dim] - face_val).abs() < 1e-9)
                .collect();
            if on_face.is_empty() {
                continue;
            }
            // Sample the face with a lattice over the remaining dimensions.
            let face_points = lattice_centers(d - 1, samples_per_face);
            for fp in &face_points {
                let mut point = Vec::with_capacity(d);
                let mut k = 0;
                for dd in 0..d {
                    if dd == dim {
                        point.push(face_val);
                    } else {
                        point.push(fp[k]);
                        k += 1;
                    }
                }
                let nearest = boundary
                    .iter()
                    .map(|&b| super::euclidean(net.coord(b), &point))
                    .fold(f64::INFINITY, f64::min);
                gap = gap.max(nearest);
            }
        }
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::three_node_path;

    #[test]
    fn single_box_density_equals_total_mass() {
        // One box covering the whole unit square: (2R)^{-d} |1|^2 with R=1/2
        // equals the network mass, and the uniformity ratio is 1.
        let net = three_node_path();
        let report = validate_assumptions(&net, &[0.5], 1);
        let check = &report.per_radius[0];
        assert!((check.density_min - net.total_edge_length()).abs() < 1e-12);
        assert!((check.sigma_ratio - 1.0).abs() < 1e-12);
        assert!(check.all_connected());
    }

    #[test]
    fn path_mass_is_total_length() {
        let net = three_node_path();
        let mass: f64 = (0..net.n_nodes()).map(|i| net.node_mass(i)).sum();
        assert!((mass - 1.0).abs() < 1e-13);
    }

    #[test]
    fn report_is_reproducible() {
        let net = crate::network::generate_fiber_network(&crate::network::GeneratorConfig::new(
            30.0, 4,
        ))
        .unwrap();
        let a = validate_assumptions(&net, &[0.25, 0.5], 9);
        let b = validate_assumptions(&net, &[0.25, 0.5], 9);
        assert_eq!(a.max_edge_length, b.max_edge_length);
        assert_eq!(a.boundary_gap, b.boundary_gap);
        for (x, y) in a.per_radius.iter().zip(&b.per_radius) {
            assert_eq!(x.density_min, y.density_min);
            assert_eq!(x.density_max, y.density_max);
            assert_eq!(x.connectivity_ok, y.connectivity_ok);
        }
    }

    #[test]
    fn generated_network_satisfies_checks_at_coarse_radius() {
        let net = crate::network::generate_fiber_network(&crate::network::GeneratorConfig::new(
            150.0, 1,
        ))
        .unwrap();
        let report = validate_assumptions(&net, &[0.125, 0.25], 16);
        assert!(
            report.r0_estimate.is_some(),
            "expected some radius to satisfy the checks: {report:?}"
        );
    }
}
