//! Sparse symmetric linear algebra: compressed-row matrices, fill-reducing
//! orderings, a simplicial LDLᵀ factorization, and conjugate gradients.
//!
//! All solvers are deterministic: orderings and reductions use fixed index
//! order, so repeated factorizations of the same matrix produce bit-identical
//! results regardless of thread count.

mod cg;
mod ldlt;
mod ordering;

pub use cg::{cg, CgResult};
pub use ldlt::{Factorization, FactorKind};
pub use ordering::{min_degree, nested_dissection, Ordering};

use crate::error::{Error, Result};

/// Sparse matrix in compressed sparse row layout. Symmetric matrices are
/// stored with full (both triangles) structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unordered triplets; duplicate entries are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            assert!(r < n_rows, "row index out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut entries: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            assert!(c < n_cols, "column index out of bounds");
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..n_rows {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.apply(x, &mut y);
        y
    }

    /// Quadratic form `(A v, v)` for square `A`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut acc = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut row_acc = 0.0;
            for (c, val) in cols.iter().zip(vals) {
                row_acc += val * v[*c];
            }
            acc += row_acc * v[r];
        }
        acc
    }

    /// Bilinear form `(A u, v)`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut row_acc = 0.0;
            for (c, val) in cols.iter().zip(vals) {
                row_acc += val * u[*c];
            }
            acc += row_acc * v[r];
        }
        acc
    }

    /// `y = Aᵀ x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        y.fill(0.0);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[r];
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((*c, r, *v));
            }
        }
        CsrMatrix::from_triplets(self.n_cols, self.n_rows, &triplets)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if (v - self.get(*c, r)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Principal submatrix on `keep` (sorted, unique indices). Requires a
    /// square matrix; returns the submatrix in the induced index order.
    pub fn principal_submatrix(&self, keep: &[usize]) -> CsrMatrix {
        assert_eq!(self.n_rows, self.n_cols);
        let mut local = vec![usize::MAX; self.n_rows];
        for (li, &gi) in keep.iter().enumerate() {
            local[gi] = li;
        }
        let mut triplets = Vec::new();
        for (lr, &gr) in keep.iter().enumerate() {
            let (cols, vals) = self.row(gr);
            for (c, v) in cols.iter().zip(vals) {
                let lc = local[*c];
                if lc != usize::MAX {
                    triplets.push((lr, lc, *v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), keep.len(), &triplets)
    }

    /// Dense copy, for small oracle problems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut dense = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                dense[(r, *c)] = *v;
            }
        }
        dense
    }

    /// Adjacency lists of the sparsity graph (square matrices, diagonal
    /// dropped), used by the ordering routines.
    pub fn sparsity_graph(&self) -> Vec<Vec<usize>> {
        assert_eq!(self.n_rows, self.n_cols);
        let mut adj = vec![Vec::new(); self.n_rows];
        for r in 0..self.n_rows {
            let (cols, _) = self.row(r);
            for &c in cols {
                if c != r {
                    adj[r].push(c);
                }
            }
        }
        adj
    }

    /// `A + s B` with matching shapes.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, *v));
            }
            let (cols, vals) = other.row(r);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((r, *c, s * v));
            }
        }
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    /// Checks residual `|Ax - b|_2 <= tol |b|_2`.
    pub fn residual_ok(&self, x: &[f64], b: &[f64], tol: f64) -> bool {
        let ax = self.apply_vec(x);
        let r2: f64 = ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum();
        let b2: f64 = b.iter().map(|v| v * v).sum();
        r2.sqrt() <= tol * b2.sqrt().max(f64::MIN_POSITIVE)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense solve used as the in-repo oracle for systems of at most a few
/// hundred unknowns.
pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let dense = a.to_dense();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let lu = dense.full_piv_lu();
    match lu.solve(&rhs) {
        Some(x) => Ok(x.as_slice().to_vec()),
        None => Err(Error::Invalid("singular dense system".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn apply_matches_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let x = [1.0, 2.0, 3.0];
        let y = a.apply_vec(&x);
        assert_eq!(y, vec![0.0, 0.0, 4.0]);
        assert!((a.quad(&x) - dot(&y, &x)).abs() < 1e-14);
    }

    #[test]
    fn principal_submatrix_picks_block() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 5.0), (2, 0, 5.0)],
        );
        let s = a.principal_submatrix(&[0, 2]);
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 1), 5.0);
        assert_eq!(s.get(1, 1), 3.0);
    }
}
