//! Simplicial LDLᵀ factorization of sparse symmetric matrices.
//!
//! Up-looking factorization over the elimination tree, in the style of the
//! classic LDL algorithm. The factor `L` is unit lower triangular, stored by
//! columns; `D` is diagonal. For positive definite input every pivot is
//! positive and the factorization doubles as a Cholesky decomposition.

use super::{norm2, CsrMatrix, Ordering};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Requires strictly positive pivots.
    Cholesky,
    /// Allows negative pivots (symmetric indefinite without 2x2 blocks).
    Ldlt,
}

#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    kind: FactorKind,
    /// perm[k] = original index of the k-th pivot.
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl Factorization {
    /// Cholesky factorization (errors on non-positive pivots).
    pub fn cholesky(a: &CsrMatrix, ordering: Ordering) -> Result<Factorization> {
        Self::factor(a, ordering, FactorKind::Cholesky)
    }

    /// LDLᵀ factorization allowing indefinite diagonals.
    pub fn ldlt(a: &CsrMatrix, ordering: Ordering) -> Result<Factorization> {
        Self::factor(a, ordering, FactorKind::Ldlt)
    }

    pub fn factor(a: &CsrMatrix, ordering: Ordering, kind: FactorKind) -> Result<Factorization> {
        assert_eq!(a.n_rows(), a.n_cols(), "factorization needs a square matrix");
        let n = a.n_rows();
        let perm = match ordering {
            Ordering::Natural => (0..n).collect::<Vec<_>>(),
            Ordering::MinDegree => super::min_degree(&a.sparsity_graph()),
            Ordering::NestedDissection => super::nested_dissection(&a.sparsity_graph()),
        };
        let mut inv_perm = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            inv_perm[orig] = k;
        }

        // Permuted upper-triangular pattern, per pivot row: entries (j, value)
        // with j <= k in pivot order.
        let mut upper: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for orig_r in 0..n {
            let k = inv_perm[orig_r];
            let (cols, vals) = a.row(orig_r);
            for (c, v) in cols.iter().zip(vals) {
                let j = inv_perm[*c];
                if j <= k {
                    upper[k].push((j, *v));
                }
            }
        }
        for row in upper.iter_mut() {
            row.sort_unstable_by_key(|&(j, _)| j);
        }

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut col_count = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(j0, _) in &upper[k] {
                let mut j = j0;
                while j != k && flag[j] != k {
                    if parent[j] == usize::MAX {
                        parent[j] = k;
                    }
                    col_count[j] += 1;
                    flag[j] = k;
                    j = parent[j];
                }
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + col_count[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut diag = vec![0.0f64; n];

        // Numeric phase.
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut next = vec![0usize; n]; // entries stored so far per column
        let mut flag = vec![usize::MAX; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let mut d = 0.0;
            for &(j0, v) in &upper[k] {
                if j0 == k {
                    d += v;
                    continue;
                }
                y[j0] += v;
                let mut len = 0usize;
                let mut j = j0;
                while flag[j] != k {
                    pattern[len] = j;
                    len += 1;
                    flag[j] = k;
                    j = parent[j];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            for t in top..n {
                let j = pattern[t];
                let yj = y[j];
                y[j] = 0.0;
                let lo = col_ptr[j];
                let hi = lo + next[j];
                for p in lo..hi {
                    y[row_idx[p]] -= values[p] * yj;
                }
                let l_kj = yj / diag[j];
                d -= l_kj * yj;
                row_idx[hi] = k;
                values[hi] = l_kj;
                next[j] += 1;
            }
            if d == 0.0 || !d.is_finite() {
                return Err(Error::ZeroPivot(perm[k]));
            }
            if kind == FactorKind::Cholesky && d <= 0.0 {
                return Err(Error::Indefinite {
                    index: perm[k],
                    pivot: d,
                });
            }
            diag[k] = d;
        }

        Ok(Factorization {
            n,
            kind,
            perm,
            col_ptr,
            row_idx,
            values,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn l_nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of negative pivots (inertia check for indefinite systems).
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|d| **d < 0.0).count()
    }

    /// Solves `A x = b` in place of a fresh vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for k in 0..self.n {
            x[k] = b[self.perm[k]];
        }
        self.solve_permuted(&mut x);
        let mut out = vec![0.0; self.n];
        for k in 0..self.n {
            out[self.perm[k]] = x[k];
        }
        out
    }

    fn solve_permuted(&self, x: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                    x[self.row_idx[p]] -= self.values[p] * xk;
                }
            }
        }
        for k in 0..n {
            x[k] /= self.diag[k];
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                acc -= self.values[p] * x[self.row_idx[p]];
            }
            x[k] = acc;
        }
    }

    /// Solves and verifies the residual contract `|Ax - b| <= tol |b|`.
    pub fn solve_checked(&self, a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let x = self.solve(b);
        let ax = a.apply_vec(&x);
        let r: f64 = ax
            .iter()
            .zip(b)
            .map(|(ai, bi)| (ai - bi) * (ai - bi))
            .sum::<f64>()
            .sqrt();
        let scale = norm2(b).max(f64::MIN_POSITIVE);
        if r > tol * scale {
            return Err(Error::NoConvergence {
                iterations: 1,
                residual: r / scale,
            });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_solve;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let f = Factorization::cholesky(&a, Ordering::Natural).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(f.solve(&b), b);
    }

    #[test]
    fn spd_solve_matches_dense_oracle() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
                (2, 2, 5.0),
            ],
        );
        let b = vec![1.0, 2.0, 3.0];
        let f = Factorization::cholesky(&a, Ordering::MinDegree).unwrap();
        let x = f.solve(&b);
        let x_dense = dense_solve(&a, &b).unwrap();
        for (xi, yi) in x.iter().zip(&x_dense) {
            assert!((xi - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn orderings_agree_on_laplacian() {
        let a = laplacian_1d(400);
        let b: Vec<f64> = (0..400).map(|i| (i as f64 * 0.37).sin()).collect();
        let x_nat = Factorization::cholesky(&a, Ordering::Natural).unwrap().solve(&b);
        let x_nd = Factorization::cholesky(&a, Ordering::NestedDissection)
            .unwrap()
            .solve(&b);
        let x_md = Factorization::cholesky(&a, Ordering::MinDegree).unwrap().solve(&b);
        for i in 0..400 {
            assert!((x_nat[i] - x_nd[i]).abs() < 1e-9);
            assert!((x_nat[i] - x_md[i]).abs() < 1e-9);
        }
        assert!(a.residual_ok(&x_nd, &b, 1e-10));
    }

    #[test]
    fn saddle_point_with_trailing_constraints_factors() {
        // [2 0 1; 0 2 1; 1 1 0]: leading block SPD, one trailing constraint
        // row. LDLT with natural order succeeds with one negative pivot.
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (1, 1, 2.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
            ],
        );
        let f = Factorization::ldlt(&a, Ordering::Natural).unwrap();
        assert_eq!(f.negative_pivots(), 1);
        // Known solution by hand elimination: x = (0.5, -0.5, 1), b = (2, 0, 0).
        let x = f.solve(&[2.0, 0.0, 0.0]);
        assert!((x[0] - 0.5).abs() < 1e-14);
        assert!((x[1] + 0.5).abs() < 1e-14);
        assert!((x[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_reported_for_cholesky() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        match Factorization::cholesky(&a, Ordering::Natural) {
            Err(Error::Indefinite { .. }) => {}
            other => panic!("expected indefiniteness error, got {other:?}"),
        }
        assert!(Factorization::ldlt(&a, Ordering::Natural).is_ok());
    }

    #[test]
    fn solve_is_linear() {
        let a = laplacian_1d(50);
        let f = Factorization::cholesky(&a, Ordering::NestedDissection).unwrap();
        let b1: Vec<f64> = (0..50).map(|i| (i as f64).cos()).collect();
        let b2: Vec<f64> = (0..50).map(|i| (i as f64 * 0.2).sin()).collect();
        let combined: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let x1 = f.solve(&b1);
        let x2 = f.solve(&b2);
        let xc = f.solve(&combined);
        for i in 0..50 {
            assert!((xc[i] - (2.0 * x1[i] - 3.0 * x2[i])).abs() < 1e-12);
        }
    }
}
