//! Generalized symmetric eigenvalue utilities: the smallest eigenpairs of
//! `K w = lambda M w` by block inverse power iteration with Rayleigh–Ritz,
//! and the extreme eigenvalues of the pencil `(K, L)` for coercivity and
//! boundedness constants.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Factorization, Ordering};
use crate::operators::SparseOperator;
use crate::rng;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals `|K w - lambda M w| / |K w|`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Computes the `count` smallest eigenpairs of `K w = lambda M w` for SPD
/// (Dirichlet-eliminated) `K` and diagonal SPD `M`. Starting vectors come
/// from the seeded `"eigen"` stream.
pub fn smallest_eigenpairs(
    k_op: &SparseOperator,
    m_op: &SparseOperator,
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<EigenResult> {
    let n = k_op.dim();
    if m_op.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m_op.dim(),
        });
    }
    if count == 0 || count > n {
        return Err(Error::Config(format!(
            "cannot compute {count} eigenpairs of a {n}-dimensional pencil"
        )));
    }
    let factor = Factorization::cholesky(k_op.matrix(), Ordering::NestedDissection)?;
    let block = (count + 2).min(n);

    let mut rng = rng::stream(seed, "eigen");
    let mut x: Vec<Vec<f64>> = (0..block).map(|_| rng::uniform_vector(&mut rng, n)).collect();
    m_orthonormalize(&mut x, m_op)?;

    let mut values = vec![0.0; block];
    let mut residuals = vec![f64::INFINITY; count];
    for it in 1..=MAX_ITERATIONS {
        // Inverse power step: Y = K^{-1} M X.
        let mut y: Vec<Vec<f64>> = x.iter().map(|xi| factor.solve(&m_op.apply(xi))).collect();
        m_orthonormalize(&mut y, m_op)?;

        // Rayleigh–Ritz on the block.
        let p = y.len();
        let mut a = nalgebra::DMatrix::zeros(p, p);
        let ky: Vec<Vec<f64>> = y.iter().map(|yi| k_op.apply(yi)).collect();
        for i in 0..p {
            for j in 0..p {
                a[(i, j)] = dot(&y[i], &ky[j]);
            }
        }
        let a = (&a + a.transpose()) * 0.5;
        let eig = a.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

        let mut x_new = Vec::with_capacity(p);
        for (slot, &src) in order.iter().enumerate() {
            values[slot] = eig.eigenvalues[src];
            let mut xi = vec![0.0; n];
            for (col, yc) in y.iter().enumerate() {
                let w = eig.eigenvectors[(col, src)];
                if w != 0.0 {
                    crate::linalg::axpy(w, yc, &mut xi);
                }
            }
            x_new.push(xi);
        }
        x = x_new;

        // Residuals of the leading `count` pairs.
        let mut all_ok = true;
        for i in 0..count {
            let kx = k_op.apply(&x[i]);
            let mx = m_op.apply(&x[i]);
            let mut r = 0.0;
            for j in 0..n {
                let d = kx[j] - values[i] * mx[j];
                r += d * d;
            }
            let rel = r.sqrt() / norm2(&kx).max(f64::MIN_POSITIVE);
            residuals[i] = rel;
            if rel > tol {
                all_ok = false;
            }
        }
        if all_ok {
            // Normalize signs deterministically: first nonzero entry > 0.
            for xi in x.iter_mut().take(count) {
                if let Some(first) = xi.iter().find(|v| v.abs() > 1e-300) {
                    if *first < 0.0 {
                        for v in xi.iter_mut() {
                            *v = -*v;
                        }
                    }
                }
            }
            return Ok(EigenResult {
                values: values[..count].to_vec(),
                vectors: x[..count].to_vec(),
                residuals,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: residuals.iter().cloned().fold(0.0, f64::max),
    })
}

/// Modified Gram-Schmidt in the M inner product, with one re-orthogonalization
/// pass. Near-dependent columns are rejected as a breakdown.
fn m_orthonormalize(x: &mut Vec<Vec<f64>>, m_op: &SparseOperator) -> Result<()> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    for xi in x.iter() {
        let mut v = xi.clone();
        for _pass in 0..2 {
            for prev in &out {
                let mp = m_op.apply(prev);
                let coef = dot(&mp, &v);
                crate::linalg::axpy(-coef, prev, &mut v);
            }
        }
        let norm = m_op.norm(&v)?;
        if norm <= 1e-300 {
            return Err(Error::Invalid(
                "eigensolver block became linearly dependent".into(),
            ));
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        out.push(v);
    }
    *x = out;
    Ok(())
}

/// Extreme generalized Rayleigh quotients of `(K v, v) / (L v, v)`:
/// `alpha` by inverse power iteration on the pencil, `beta` by power
/// iteration, both on the Dirichlet-constrained space.
pub fn extreme_rayleigh(
    k_op: &SparseOperator,
    l_op: &SparseOperator,
    tol: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = k_op.dim();
    if l_op.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l_op.dim(),
        });
    }
    let k_factor = Factorization::cholesky(k_op.matrix(), Ordering::NestedDissection)?;
    let l_factor = Factorization::cholesky(l_op.matrix(), Ordering::NestedDissection)?;
    let mut rng = rng::stream(seed, "eigen");

    // alpha: v <- K^{-1} L v converges to the smallest eigenvector.
    let mut v = rng::uniform_vector(&mut rng, n);
    let alpha = pencil_iterate(&mut v, k_op, l_op, tol, |w| k_factor.solve(&l_op.apply(w)))?;

    // beta: v <- L^{-1} K v converges to the largest.
    let mut v = rng::uniform_vector(&mut rng, n);
    let beta = pencil_iterate(&mut v, k_op, l_op, tol, |w| l_factor.solve(&k_op.apply(w)))?;

    Ok((alpha, beta))
}

fn pencil_iterate<F: Fn(&[f64]) -> Vec<f64>>(
    v: &mut Vec<f64>,
    k_op: &SparseOperator,
    l_op: &SparseOperator,
    tol: f64,
    advance: F,
) -> Result<f64> {
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mut w = advance(v);
        let norm = l_op.norm(&w)?;
        if norm <= 1e-300 {
            return Err(Error::Invalid("pencil iteration collapsed".into()));
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        *v = w;
        let kv = k_op.apply(v);
        let lv = l_op.apply(v);
        lambda = dot(&kv, v) / dot(&lv, v);
        let mut r = 0.0;
        for j in 0..v.len() {
            let d = kv[j] - lambda * lv[j];
            r += d * d;
        }
        let scale = norm2(&kv).max(lambda.abs() * norm2(&lv)).max(f64::MIN_POSITIVE);
        if r.sqrt() <= tol * scale {
            return Ok(lambda);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: lambda,
    })
}

/// Dense oracle: all eigenvalues (and vectors) of `K w = lambda M w` with
/// diagonal `M`, via the symmetric reduction `M^{-1/2} K M^{-1/2}`.
pub fn dense_generalized_eigen(
    k_op: &SparseOperator,
    m_op: &SparseOperator,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k_op.dim();
    let m_diag = m_op
        .diagonal()
        .ok_or_else(|| Error::Invalid("dense oracle needs a diagonal mass".into()))?;
    let sqrt_inv: Vec<f64> = m_diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut dense = k_op.matrix().to_dense();
    for i in 0..n {
        for j in 0..n {
            dense[(i, j)] *= sqrt_inv[i] * sqrt_inv[j];
        }
    }
    let dense = (&dense + dense.transpose()) * 0.5;
    let eig = dense.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&src| {
            (0..n)
                .map(|row| eig.eigenvectors[(row, src)] * sqrt_inv[row])
                .collect()
        })
        .collect();
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_fiber_network, GeneratorConfig, Network};
    use crate::operators::{
        assemble_graph_laplacian, assemble_mass, assemble_scalar_stiffness,
        random_edge_coefficients,
    };

    #[test]
    fn single_free_node_pencil_by_hand() {
        // 2-node edge of length h with one end fixed: K = gamma/h, M = h/2,
        // so lambda = 2 gamma / h^2.
        let h = 0.4;
        let gamma = 0.7;
        let net = Network::new(2, vec![0.0, 0.0, h, 0.0], vec![[0, 1]], &[0]).unwrap();
        let k = assemble_scalar_stiffness(&net, &[gamma])
            .unwrap()
            .eliminate_boundary(&net);
        let m = assemble_mass(&net, 1).unwrap().eliminate_boundary(&net);
        let result = smallest_eigenpairs(&k, &m, 1, 1e-12, 1).unwrap();
        let expected = 2.0 * gamma / (h * h);
        assert!(
            (result.values[0] - expected).abs() < 1e-10 * expected,
            "lambda = {}, expected {}",
            result.values[0],
            expected
        );
    }

    #[test]
    fn block_iteration_matches_dense_oracle() {
        let net = generate_fiber_network(&GeneratorConfig::new(25.0, 1))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)
            .unwrap();
        let gamma = random_edge_coefficients(&net, 0.1, 0.9, 1);
        let k = assemble_scalar_stiffness(&net, &gamma)
            .unwrap()
            .eliminate_boundary(&net);
        let m = assemble_mass(&net, 1).unwrap().eliminate_boundary(&net);
        let iterative = smallest_eigenpairs(&k, &m, 6, 1e-11, 3).unwrap();
        let (dense_values, _) = dense_generalized_eigen(&k, &m).unwrap();
        for i in 0..6 {
            let rel = (iterative.values[i] - dense_values[i]).abs() / dense_values[i];
            assert!(
                rel < 1e-8,
                "eigenvalue {i}: {} vs dense {}",
                iterative.values[i],
                dense_values[i]
            );
        }
        // Ordering and positivity.
        for w in iterative.values.windows(2) {
            assert!(w[0] > 0.0 && w[0] <= w[1] * (1.0 + 1e-12));
        }
        // M-orthonormality.
        for i in 0..6 {
            for j in 0..6 {
                let mij = dot(&m.apply(&iterative.vectors[i]), &iterative.vectors[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (mij - expected).abs() < 1e-8,
                    "M-orthonormality defect at ({i},{j}): {mij}"
                );
            }
        }
    }

    #[test]
    fn rayleigh_extremes_bracketed_by_coefficients() {
        let net = generate_fiber_network(&GeneratorConfig::new(25.0, 2))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)
            .unwrap();
        let gamma = random_edge_coefficients(&net, 0.1, 0.9, 2);
        let k = assemble_scalar_stiffness(&net, &gamma)
            .unwrap()
            .eliminate_boundary(&net);
        let l = assemble_graph_laplacian(&net)
            .unwrap()
            .eliminate_boundary(&net);
        let (alpha, beta) = extreme_rayleigh(&k, &l, 1e-9, 5).unwrap();
        let gmin = gamma.iter().cloned().fold(f64::INFINITY, f64::min);
        let gmax = gamma.iter().cloned().fold(0.0f64, f64::max);
        assert!(alpha >= gmin - 1e-8, "alpha {alpha} below {gmin}");
        assert!(beta <= gmax + 1e-8, "beta {beta} above {gmax}");
        assert!(alpha <= beta);
    }

    #[test]
    fn identical_operators_give_unit_extremes() {
        let net = generate_fiber_network(&GeneratorConfig::new(25.0, 3))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)
            .unwrap();
        let l = assemble_graph_laplacian(&net)
            .unwrap()
            .eliminate_boundary(&net);
        let (alpha, beta) = extreme_rayleigh(&l, &l, 1e-10, 7).unwrap();
        assert!((alpha - 1.0).abs() < 1e-9);
        assert!((beta - 1.0).abs() < 1e-9);
    }
}
