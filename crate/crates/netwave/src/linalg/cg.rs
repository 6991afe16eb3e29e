//! Preconditioned conjugate gradients.

use super::{axpy, dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = b` for SPD `A` with an optional diagonal (Jacobi)
/// preconditioner. Convergence on `|r|_2 <= tol |b|_2`.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    jacobi: Option<&[f64]>,
    tol: f64,
    max_iterations: usize,
) -> Result<CgResult> {
    let n = b.len();
    assert_eq!(a.n_rows(), n);
    let apply_precond = |r: &[f64], z: &mut [f64]| match jacobi {
        Some(d) => {
            for i in 0..n {
                z[i] = r[i] / d[i];
            }
        }
        None => z.copy_from_slice(r),
    };

    let b_norm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut scratch = vec![0.0; n];

    for it in 0..max_iterations {
        let res = norm2(&r);
        if res <= tol * b_norm {
            return Ok(CgResult {
                x,
                iterations: it,
                residual: res / b_norm,
            });
        }
        a.apply(&p, &mut scratch);
        let pap = dot(&p, &scratch);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Invalid(format!(
                "conjugate gradient breakdown: p'Ap = {pap:e}"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &scratch, &mut r);
        apply_precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r) / b_norm;
    if res <= tol {
        Ok(CgResult {
            x,
            iterations: max_iterations,
            residual: res,
        })
    } else {
        Err(Error::NoConvergence {
            iterations: max_iterations,
            residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_spd_system() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        let out = cg(&a, &b, Some(&diag), 1e-12, 1000).unwrap();
        assert!(a.residual_ok(&out.x, &b, 1e-10));
        assert!(out.iterations <= n + 1);
    }

    #[test]
    fn cg_reports_nonconvergence() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1e8)]);
        let b = vec![1.0, 1.0];
        match cg(&a, &b, None, 1e-14, 1) {
            Err(Error::NoConvergence { .. }) => {}
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
