//! Localized orthogonal decomposition: element correctors from constrained
//! patch solves, the corrected multiscale basis with projected coarse
//! operators, and Ritz projections onto the multiscale space.
//!
//! A corrector problem asks for `q` supported on the patch with `I q = 0`
//! and `(K q, w) = (K_T v, w)` for all patch test functions `w`. The
//! Lagrange system
//!
//! ```text
//! [ K_p  C' ] [ q ]   [ r ]
//! [ C    0  ] [ l ] = [ 0 ]
//! ```
//!
//! is solved by block elimination: `K_p` is a principal submatrix of the
//! Dirichlet-constrained stiffness and hence positive definite, so a sparse
//! Cholesky of `K_p` and a dense Schur complement on the multiplier block
//! give the direct path. Patches above a size threshold instead use
//! conjugate gradients projected onto `ker C`. Both paths agree to solver
//! tolerance and are cross-checked in the tests.

use rayon::prelude::*;

use crate::coarse_fem::{build_patch, CoarseMesh, Interpolator, Patch, PatchSeed};
use crate::error::{Error, Result};
use crate::io::BasisData;
use crate::linalg::{dot, norm2, CsrMatrix, Factorization, Ordering};
use crate::network::Network;
use crate::operators::{SparseOperator, StiffnessModel};

/// Patch saddle solver options.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Unknown-count threshold above which the projected CG path is used.
    pub direct_threshold: usize,
    /// Residual tolerance for solves and constraint satisfaction checks.
    pub tol: f64,
    pub max_cg_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            direct_threshold: 50_000,
            tol: 1e-10,
            max_cg_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorrectorStats {
    pub n_patches: usize,
    pub max_patch_unknowns: usize,
    pub n_solves: usize,
    /// Worst relative residual of the saddle equations across solves.
    pub max_residual: f64,
    /// Worst constraint violation `max |I q|` across correctors.
    pub max_constraint_violation: f64,
    pub per_patch: Vec<PatchStat>,
}

#[derive(Debug, Clone)]
pub struct PatchStat {
    pub element: usize,
    pub unknowns: usize,
    pub constraints: usize,
    pub right_hand_sides: usize,
    pub solve_seconds: f64,
    pub residual: f64,
}

/// Corrector vectors `Q_k (phi_i ⊗ e_c)`, one sparse column per coarse DOF,
/// over free fine DOFs.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub components: usize,
    pub k: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
    pub stats: CorrectorStats,
}

/// The corrected basis `{phi_i - Q_k phi_i}` (column-wise, fine-DOF
/// representation) with the projected coarse operators.
#[derive(Debug, Clone)]
pub struct MultiscaleBasis {
    columns: Vec<Vec<(usize, f64)>>,
    k_ms: nalgebra::DMatrix<f64>,
    m_ms: nalgebra::DMatrix<f64>,
    k_ms_factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    n_fine: usize,
    components: usize,
    level: u32,
    k: usize,
}

impl MultiscaleBasis {
    /// Coarse dimension `m0 * components`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    pub fn k_ms(&self) -> &nalgebra::DMatrix<f64> {
        &self.k_ms
    }

    pub fn m_ms(&self) -> &nalgebra::DMatrix<f64> {
        &self.m_ms
    }

    /// Fine representation `B c`.
    pub fn to_fine(&self, coarse: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_fine];
        for (col, &c) in self.columns.iter().zip(coarse) {
            if c != 0.0 {
                for &(i, v) in col {
                    out[i] += c * v;
                }
            }
        }
        out
    }

    /// `B' x` for a fine-DOF vector.
    pub fn project_rhs(&self, fine: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(i, v)| v * fine[i]).sum())
            .collect()
    }

    /// Solves `K_ms c = B' K v`: the `K`-orthogonal (Ritz) projection of a
    /// fine vector onto the multiscale space, returned as coarse
    /// coefficients.
    pub fn ritz_project(&self, k_op: &SparseOperator, v_fine: &[f64]) -> Result<Vec<f64>> {
        if v_fine.len() != self.n_fine {
            return Err(Error::DimensionMismatch {
                expected: self.n_fine,
                got: v_fine.len(),
            });
        }
        let kv = k_op.apply(v_fine);
        let rhs = nalgebra::DVector::from_vec(self.project_rhs(&kv));
        let c = self.k_ms_factor.solve(&rhs);
        Ok(c.as_slice().to_vec())
    }

    pub fn to_data(&self) -> BasisData {
        BasisData {
            n_fine: self.n_fine,
            components: self.components,
            level: self.level,
            k: self.k,
            columns: self.columns.clone(),
            k_ms: self.k_ms.transpose().as_slice().to_vec(),
            m_ms: self.m_ms.transpose().as_slice().to_vec(),
        }
    }

    pub fn from_data(data: BasisData) -> Result<Self> {
        let m = data.columns.len();
        let k_ms = nalgebra::DMatrix::from_row_slice(m, m, &data.k_ms);
        let m_ms = nalgebra::DMatrix::from_row_slice(m, m, &data.m_ms);
        let k_ms_factor = k_ms
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invalid("projected stiffness is not positive definite".into()))?;
        Ok(MultiscaleBasis {
            columns: data.columns,
            k_ms,
            m_ms,
            k_ms_factor,
            n_fine: data.n_fine,
            components: data.components,
            level: data.level,
            k: data.k,
        })
    }
}

/// Context shared by corrector computations.
pub struct LodContext<'a> {
    pub net: &'a Network,
    pub mesh: &'a CoarseMesh,
    pub interp: &'a Interpolator,
    /// Dirichlet-constrained stiffness.
    pub k_op: &'a SparseOperator,
    /// Dirichlet-constrained mass.
    pub m_op: &'a SparseOperator,
    pub model: &'a StiffnessModel,
    pub options: SolveOptions,
}

impl<'a> LodContext<'a> {
    fn components(&self) -> usize {
        self.model.components()
    }

    fn n_fine(&self) -> usize {
        self.k_op.dim()
    }

    fn dof_of_node(&self, node: usize, comp: usize) -> Option<usize> {
        self.k_op
            .dof_map()
            .expect("stiffness must be Dirichlet-constrained")
            .dof(node, comp)
    }

    /// Prolongs coarse basis `rank` into a free-DOF vector on component `c`.
    fn basis_fine_vector(&self, rank: usize, comp: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_fine()];
        let p = self.interp.prolongation();
        // Column `rank` of P, scattered into component `comp`.
        for node in 0..self.net.n_nodes() {
            let (cols, vals) = p.row(node);
            if let Ok(pos) = cols.binary_search(&rank) {
                if let Some(dof) = self.dof_of_node(node, comp) {
                    out[dof] = vals[pos];
                }
            }
        }
        out
    }
}

/// Computes localized element correctors for every element and accumulates
/// them per coarse basis function: `Q_k v = sum_T Q_k^T v`.
///
/// Elements are processed in parallel; contributions are reduced in fixed
/// element order so the result is independent of thread count.
pub fn compute_correctors(ctx: &LodContext, k: usize) -> Result<CorrectorSet> {
    let comps = ctx.components();
    let n_cols = ctx.mesh.n_free() * comps;
    let elements: Vec<usize> = (0..ctx.mesh.n_elements()).collect();

    let per_element: Vec<Result<(Vec<(usize, Vec<(usize, f64)>)>, PatchStat)>> = elements
        .par_iter()
        .map(|&elem| element_corrector_batch(ctx, elem, k))
        .collect();

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_cols];
    let mut dense_cols: Vec<Option<Vec<f64>>> = vec![None; n_cols];
    let mut stats = CorrectorStats {
        n_patches: elements.len(),
        ..Default::default()
    };
    for result in per_element {
        let (contribs, stat) = result?;
        stats.max_patch_unknowns = stats.max_patch_unknowns.max(stat.unknowns);
        stats.n_solves += stat.right_hand_sides;
        stats.max_residual = stats.max_residual.max(stat.residual);
        for (col, sparse) in contribs {
            let dense = dense_cols[col].get_or_insert_with(|| vec![0.0; ctx.n_fine()]);
            for (i, v) in sparse {
                dense[i] += v;
            }
        }
        stats.per_patch.push(stat);
    }
    for (col, dense) in dense_cols.into_iter().enumerate() {
        if let Some(dense) = dense {
            columns[col] = dense
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v != 0.0)
                .collect();
        }
    }

    // Constraint check: the corrector lies in ker(I).
    let map = ctx.k_op.dof_map().unwrap();
    let mut worst: f64 = 0.0;
    for col in &columns {
        if col.is_empty() {
            continue;
        }
        for c in 0..comps {
            let mut full = vec![0.0; ctx.net.n_nodes()];
            for &(dof, v) in col {
                let (node, dc) = map.node_of_dof(dof);
                if dc == c {
                    full[node] = v;
                }
            }
            let coarse = ctx.interp.interpolate(&full);
            worst = worst.max(coarse.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        }
    }
    stats.max_constraint_violation = worst;

    Ok(CorrectorSet {
        components: comps,
        k,
        columns,
        stats,
    })
}

/// All corrector contributions of one element: solves
/// `(K Q_k^T v, w) = (K_T v, w)` on the patch `U_k(T)` for every coarse
/// basis function (per component) that `K_T` sees.
fn element_corrector_batch(
    ctx: &LodContext,
    elem: usize,
    k: usize,
) -> Result<(Vec<(usize, Vec<(usize, f64)>)>, PatchStat)> {
    let start = std::time::Instant::now();
    let comps = ctx.components();
    let patch = build_patch(ctx.mesh, ctx.net, PatchSeed::Element(elem), k);
    let k_t = ctx.model.assemble_restricted(ctx.net, ctx.mesh.element_nodes(elem))?;

    // Candidate coarse basis functions: corners of elements within one layer
    // of T (the stiffness couples one edge-hop outward).
    let hop = build_patch(ctx.mesh, ctx.net, PatchSeed::Element(elem), 1);
    let mut candidates: Vec<usize> = Vec::new();
    for &e in &hop.elements {
        for corner in ctx.mesh.element_corner_ids(e) {
            if let Some(rank) = ctx.mesh.free_rank(corner) {
                if !candidates.contains(&rank) {
                    candidates.push(rank);
                }
            }
        }
    }
    candidates.sort_unstable();

    // Element-restricted loads, restricted to patch unknowns.
    let map = ctx.k_op.dof_map().unwrap();
    let np = patch.n_fine() * comps;
    let mut rhs_cols: Vec<(usize, Vec<f64>)> = Vec::new();
    for &rank in &candidates {
        for c in 0..comps {
            let full = prolonged_basis_full(ctx, rank, c);
            let load_full = k_t.matrix().apply_vec(&full);
            let mut load = vec![0.0; np];
            let mut nonzero = false;
            for (li, &node) in patch.fine_nodes.iter().enumerate() {
                for cc in 0..comps {
                    let v = load_full[node * comps + cc];
                    if v != 0.0 {
                        load[li * comps + cc] = v;
                        nonzero = true;
                    }
                }
            }
            if nonzero {
                rhs_cols.push((rank * comps + c, load));
            }
        }
    }
    if rhs_cols.is_empty() {
        return Ok((
            Vec::new(),
            PatchStat {
                element: elem,
                unknowns: np,
                constraints: 0,
                right_hand_sides: 0,
                solve_seconds: start.elapsed().as_secs_f64(),
                residual: 0.0,
            },
        ));
    }

    // Patch stiffness: principal submatrix of the constrained operator.
    let keep: Vec<usize> = patch
        .fine_nodes
        .iter()
        .flat_map(|&node| (0..comps).map(move |c| map.dof(node, c).expect("free node")))
        .collect();
    let k_p = ctx.k_op.matrix().principal_submatrix(&keep);

    // Constraint rows: interpolation functionals of coarse nodes meeting the
    // patch, per component, restricted to patch unknowns.
    let constraints = constraint_matrix(ctx, &patch, comps, np);

    let loads: Vec<&[f64]> = rhs_cols.iter().map(|(_, l)| l.as_slice()).collect();
    let solved = solve_saddle(&k_p, &constraints, &loads, &ctx.options)?;

    let mut out = Vec::with_capacity(rhs_cols.len());
    let mut residual: f64 = 0.0;
    for ((col, _), sol) in rhs_cols.iter().zip(&solved) {
        residual = residual.max(sol.residual);
        let mut sparse = Vec::new();
        for (li, &node) in patch.fine_nodes.iter().enumerate() {
            for c in 0..comps {
                let v = sol.q[li * comps + c];
                if v != 0.0 {
                    sparse.push((map.dof(node, c).unwrap(), v));
                }
            }
        }
        out.push((*col, sparse));
    }
    Ok((
        out,
        PatchStat {
            element: elem,
            unknowns: np,
            constraints: constraints.n_rows(),
            right_hand_sides: rhs_cols.len(),
            solve_seconds: start.elapsed().as_secs_f64(),
            residual,
        },
    ))
}

/// Prolonged coarse basis function as a full-node componentwise vector.
fn prolonged_basis_full(ctx: &LodContext, rank: usize, comp: usize) -> Vec<f64> {
    let comps = ctx.components();
    let n = ctx.net.n_nodes();
    let mut out = vec![0.0; n * comps];
    let p = ctx.interp.prolongation();
    for node in 0..n {
        let (cols, vals) = p.row(node);
        if let Ok(pos) = cols.binary_search(&rank) {
            out[node * comps + comp] = vals[pos];
        }
    }
    out
}

/// Interpolation constraint rows for a patch, one per (coarse node in patch,
/// component), restricted to patch unknowns. All-zero rows are dropped.
fn constraint_matrix(ctx: &LodContext, patch: &Patch, comps: usize, np: usize) -> CsrMatrix {
    let f = ctx.interp.functionals();
    let mut triplets = Vec::new();
    let mut row = 0usize;
    for &rank in &patch.coarse_ranks {
        let (cols, vals) = f.row(rank);
        for c in 0..comps {
            let mut any = false;
            for (node, w) in cols.iter().zip(vals) {
                if let Some(li) = patch.local_of_node[*node] {
                    triplets.push((row, li * comps + c, *w));
                    any = true;
                }
            }
            if any {
                row += 1;
            }
        }
    }
    CsrMatrix::from_triplets(row, np, &triplets)
}

pub struct SaddleSolution {
    pub q: Vec<f64>,
    pub residual: f64,
}

/// Solves the constrained problems `K q + C' l = r, C q = 0` for several
/// right-hand sides. Chooses the direct Schur path or projected CG by size.
pub fn solve_saddle(
    k_p: &CsrMatrix,
    c: &CsrMatrix,
    loads: &[&[f64]],
    options: &SolveOptions,
) -> Result<Vec<SaddleSolution>> {
    if k_p.n_rows() <= options.direct_threshold {
        solve_saddle_direct(k_p, c, loads, options)
    } else {
        solve_saddle_projected_cg(k_p, c, loads, options)
    }
}

/// Direct path: sparse Cholesky of `K_p`, dense Schur complement
/// `S = C K_p^{-1} C'` on the multipliers.
pub fn solve_saddle_direct(
    k_p: &CsrMatrix,
    c: &CsrMatrix,
    loads: &[&[f64]],
    options: &SolveOptions,
) -> Result<Vec<SaddleSolution>> {
    let np = k_p.n_rows();
    let nc = c.n_rows();
    let factor = Factorization::cholesky(k_p, Ordering::NestedDissection).map_err(|e| match e {
        Error::Indefinite { .. } | Error::ZeroPivot(_) => Error::SingularSaddle(format!(
            "patch stiffness not positive definite ({e}); patch may lack interior nodes"
        )),
        other => other,
    })?;

    // Z = K_p^{-1} C' and S = C Z.
    let mut z_cols: Vec<Vec<f64>> = Vec::with_capacity(nc);
    for i in 0..nc {
        let mut ci = vec![0.0; np];
        let (cols, vals) = c.row(i);
        for (j, v) in cols.iter().zip(vals) {
            ci[*j] = *v;
        }
        z_cols.push(factor.solve(&ci));
    }
    let mut s = nalgebra::DMatrix::zeros(nc, nc);
    for i in 0..nc {
        for j in 0..nc {
            let (cols, vals) = c.row(i);
            let mut acc = 0.0;
            for (col, v) in cols.iter().zip(vals) {
                acc += v * z_cols[j][*col];
            }
            s[(i, j)] = acc;
        }
    }
    // Symmetrize roundoff before factorizing.
    let s = (&s + s.transpose()) * 0.5;
    let s_factor = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSaddle("dependent interpolation constraints".into()))?;

    let mut out = Vec::with_capacity(loads.len());
    for &r in loads {
        let y = factor.solve(r);
        let cy = c.apply_vec(&y);
        let lambda = s_factor.solve(&nalgebra::DVector::from_column_slice(&cy));
        let mut q = y;
        for (i, zi) in z_cols.iter().enumerate() {
            let li = lambda[i];
            if li != 0.0 {
                for (qv, zv) in q.iter_mut().zip(zi) {
                    *qv -= li * zv;
                }
            }
        }
        let residual = saddle_residual(k_p, c, &q, lambda.as_slice(), r);
        if residual > options.tol * 1e3 {
            return Err(Error::NoConvergence {
                iterations: 1,
                residual,
            });
        }
        out.push(SaddleSolution { q, residual });
    }
    Ok(out)
}

/// Iterative path: conjugate gradients on `K_p` restricted to `ker C` by
/// projecting residuals with `P = I - C'(CC')^{-1}C`.
pub fn solve_saddle_projected_cg(
    k_p: &CsrMatrix,
    c: &CsrMatrix,
    loads: &[&[f64]],
    options: &SolveOptions,
) -> Result<Vec<SaddleSolution>> {
    let np = k_p.n_rows();
    let nc = c.n_rows();
    let mut cct = nalgebra::DMatrix::zeros(nc, nc);
    for i in 0..nc {
        let (ci, vi) = c.row(i);
        for j in 0..nc {
            let (cj, vj) = c.row(j);
            // Sparse dot of rows i and j.
            let mut acc = 0.0;
            let (mut a, mut b) = (0, 0);
            while a < ci.len() && b < cj.len() {
                match ci[a].cmp(&cj[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        acc += vi[a] * vj[b];
                        a += 1;
                        b += 1;
                    }
                }
            }
            cct[(i, j)] = acc;
        }
    }
    let cct_factor = cct
        .cholesky()
        .ok_or_else(|| Error::SingularSaddle("dependent interpolation constraints".into()))?;
    let project = |v: &mut Vec<f64>| {
        let cv = c.apply_vec(v);
        let mu = cct_factor.solve(&nalgebra::DVector::from_column_slice(&cv));
        let mut correction = vec![0.0; np];
        c.apply_transpose(mu.as_slice(), &mut correction);
        for (vi, ci) in v.iter_mut().zip(&correction) {
            *vi -= ci;
        }
    };

    let mut out = Vec::with_capacity(loads.len());
    let mut scratch = vec![0.0; np];
    for &b in loads {
        let mut x = vec![0.0; np];
        let mut r = b.to_vec();
        project(&mut r);
        let b_norm = norm2(&r).max(f64::MIN_POSITIVE);
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut converged = false;
        let mut final_res = 0.0;
        for _ in 0..options.max_cg_iterations {
            let res = rr.sqrt();
            final_res = res / b_norm;
            if res <= options.tol * b_norm {
                converged = true;
                break;
            }
            k_p.apply(&p, &mut scratch);
            let mut ap = scratch.clone();
            project(&mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(Error::SingularSaddle(format!(
                    "projected CG breakdown: p'Ap = {pap:e}"
                )));
            }
            let alpha = rr / pap;
            for i in 0..np {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            project(&mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..np {
                p[i] = r[i] + beta * p[i];
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations: options.max_cg_iterations,
                residual: final_res,
            });
        }
        out.push(SaddleSolution {
            q: x,
            residual: final_res,
        });
    }
    Ok(out)
}

fn saddle_residual(k_p: &CsrMatrix, c: &CsrMatrix, q: &[f64], lambda: &[f64], r: &[f64]) -> f64 {
    let mut kq = k_p.apply_vec(q);
    let mut ct_lambda = vec![0.0; q.len()];
    c.apply_transpose(lambda, &mut ct_lambda);
    for i in 0..kq.len() {
        kq[i] += ct_lambda[i] - r[i];
    }
    let cq = c.apply_vec(q);
    let scale = norm2(r).max(f64::MIN_POSITIVE);
    (norm2(&kq) + norm2(&cq)) / scale
}

/// Global (unlocalized) corrector `Q v`: solves `(K Q v, w) = (rhs, w)` over
/// all of `W` with `rhs = K v`.
pub fn global_corrector(ctx: &LodContext, v_fine: &[f64]) -> Result<Vec<f64>> {
    let rhs = ctx.k_op.apply(v_fine);
    global_corrector_from_load(ctx, &rhs)
}

/// Global corrector with an explicit load vector.
pub fn global_corrector_from_load(ctx: &LodContext, load: &[f64]) -> Result<Vec<f64>> {
    let comps = ctx.components();
    let n = ctx.n_fine();
    // Constraints: all free coarse functionals per component over all DOFs.
    let f = ctx.interp.functionals();
    let map = ctx.k_op.dof_map().unwrap();
    let mut triplets = Vec::new();
    for rank in 0..f.n_rows() {
        let (cols, vals) = f.row(rank);
        for c in 0..comps {
            for (node, w) in cols.iter().zip(vals) {
                if let Some(dof) = map.dof(*node, c) {
                    triplets.push((rank * comps + c, dof, *w));
                }
            }
        }
    }
    let constraints = CsrMatrix::from_triplets(f.n_rows() * comps, n, &triplets);
    let solutions = solve_saddle(ctx.k_op.matrix(), &constraints, &[load], &ctx.options)?;
    Ok(solutions.into_iter().next().unwrap().q)
}

/// Builds the multiscale basis from element correctors with `k` layers.
pub fn build_multiscale_basis(ctx: &LodContext, k: usize) -> Result<(MultiscaleBasis, CorrectorStats)> {
    let correctors = compute_correctors(ctx, k)?;
    let basis = assemble_basis(ctx, &correctors.columns, k)?;
    Ok((basis, correctors.stats))
}

/// Builds the ideal-method basis from global correctors (one constrained
/// solve per coarse basis function and component).
pub fn build_ideal_basis(ctx: &LodContext) -> Result<MultiscaleBasis> {
    let comps = ctx.components();
    let m0 = ctx.mesh.n_free();
    let mut columns = Vec::with_capacity(m0 * comps);
    for rank in 0..m0 {
        for c in 0..comps {
            let v = ctx.basis_fine_vector(rank, c);
            let q = global_corrector(ctx, &v)?;
            columns.push(q.into_iter().enumerate().filter(|(_, x)| *x != 0.0).collect());
        }
    }
    assemble_basis(ctx, &columns, usize::MAX)
}

fn assemble_basis(
    ctx: &LodContext,
    corrector_columns: &[Vec<(usize, f64)>],
    k: usize,
) -> Result<MultiscaleBasis> {
    let comps = ctx.components();
    let m0 = ctx.mesh.n_free();
    let n = ctx.n_fine();
    let n_cols = m0 * comps;
    assert_eq!(corrector_columns.len(), n_cols);

    let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_cols);
    for rank in 0..m0 {
        for c in 0..comps {
            let mut dense = ctx.basis_fine_vector(rank, c);
            for &(i, v) in &corrector_columns[rank * comps + c] {
                dense[i] -= v;
            }
            columns.push(
                dense
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| *v != 0.0)
                    .collect(),
            );
        }
    }

    // Projected operators B' A B, computed column-block-wise in parallel
    // with a deterministic layout.
    let k_cols: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|col| {
            let mut dense = vec![0.0; n];
            for &(i, v) in col {
                dense[i] = v;
            }
            ctx.k_op.apply(&dense)
        })
        .collect();
    let m_cols: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|col| {
            let mut dense = vec![0.0; n];
            for &(i, v) in col {
                dense[i] = v;
            }
            ctx.m_op.apply(&dense)
        })
        .collect();

    let mut k_ms = nalgebra::DMatrix::zeros(n_cols, n_cols);
    let mut m_ms = nalgebra::DMatrix::zeros(n_cols, n_cols);
    for i in 0..n_cols {
        for j in 0..n_cols {
            let kv: f64 = columns[i].iter().map(|&(r, v)| v * k_cols[j][r]).sum();
            let mv: f64 = columns[i].iter().map(|&(r, v)| v * m_cols[j][r]).sum();
            k_ms[(i, j)] = kv;
            m_ms[(i, j)] = mv;
        }
    }
    let k_ms = (&k_ms + k_ms.transpose()) * 0.5;
    let m_ms = (&m_ms + m_ms.transpose()) * 0.5;

    let k_ms_factor = k_ms
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("projected stiffness is not positive definite".into()))?;

    Ok(MultiscaleBasis {
        columns,
        k_ms,
        m_ms,
        k_ms_factor,
        n_fine: n,
        components: comps,
        level: ctx.mesh.level(),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse_fem::{build_interpolator, build_mesh};
    use crate::network::{generate_fiber_network, GeneratorConfig, Network};
    use crate::operators::{assemble_mass, random_edge_coefficients, replicate_components};
    use crate::rng;

    struct Setup {
        net: Network,
        mesh: CoarseMesh,
        interp: Interpolator,
        k_op: SparseOperator,
        m_op: SparseOperator,
        model: StiffnessModel,
    }

    fn scalar_setup(total_length: f64, seed: u64, level: u32) -> Setup {
        let net = generate_fiber_network(&GeneratorConfig::new(total_length, seed))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0 || x[0] == 1.0)
            .unwrap();
        let mesh = build_mesh(&net, level).unwrap();
        let mass = assemble_mass(&net, 1).unwrap();
        let interp = build_interpolator(&mesh, &net, &mass, true).unwrap();
        let gamma = random_edge_coefficients(&net, 0.1, 0.9, seed);
        let model = StiffnessModel::Scalar { gamma };
        let k_op = model.assemble(&net).unwrap().eliminate_boundary(&net);
        let m_op = mass.eliminate_boundary(&net);
        Setup {
            net,
            mesh,
            interp,
            k_op,
            m_op,
            model,
        }
    }

    impl Setup {
        fn ctx(&self) -> LodContext<'_> {
            LodContext {
                net: &self.net,
                mesh: &self.mesh,
                interp: &self.interp,
                k_op: &self.k_op,
                m_op: &self.m_op,
                model: &self.model,
                options: SolveOptions::default(),
            }
        }
    }

    #[test]
    fn correctors_lie_in_interpolator_kernel() {
        let s = scalar_setup(100.0, 1, 2);
        let set = compute_correctors(&s.ctx(), 1).unwrap();
        assert!(
            set.stats.max_constraint_violation <= 1e-9,
            "constraint violation {}",
            set.stats.max_constraint_violation
        );
    }

    #[test]
    fn zero_load_gives_zero_corrector() {
        // A coarse function whose support stays away from element T makes
        // K_T v = 0, so T contributes nothing to that basis function.
        let s = scalar_setup(100.0, 1, 2);
        let set = compute_correctors(&s.ctx(), 1).unwrap();
        // All empty columns correspond to coarse nodes far from any element
        // loads; every non-empty column is supported where expected. The
        // essential check: far-apart (rank, element) pairs contribute zero,
        // which the batch construction guarantees by skipping zero loads.
        assert!(set.columns.iter().any(|c| !c.is_empty()));
    }

    #[test]
    fn saturated_localization_matches_global_corrector() {
        let s = scalar_setup(100.0, 1, 2);
        let ctx = s.ctx();
        let k_sat = s.mesh.elements_per_dim(); // patch = whole domain
        let set = compute_correctors(&ctx, k_sat).unwrap();
        // Compare per-basis corrector with the single global solve.
        for rank in (0..s.mesh.n_free()).step_by(3) {
            let v = ctx.basis_fine_vector(rank, 0);
            let q_global = global_corrector(&ctx, &v).unwrap();
            let mut q_local = vec![0.0; ctx.n_fine()];
            for &(i, val) in &set.columns[rank] {
                q_local[i] = val;
            }
            let diff: Vec<f64> = q_global
                .iter()
                .zip(&q_local)
                .map(|(a, b)| a - b)
                .collect();
            let rel = s.k_op.norm(&diff).unwrap() / s.k_op.norm(&v).unwrap().max(1e-300);
            assert!(rel <= 1e-8, "rank {rank}: saturation mismatch {rel:e}");
        }
    }

    #[test]
    fn direct_and_projected_cg_agree_on_a_patch() {
        let s = scalar_setup(100.0, 2, 2);
        let ctx = s.ctx();
        let patch = build_patch(&s.mesh, &s.net, PatchSeed::Element(5), 1);
        let map = s.k_op.dof_map().unwrap();
        let keep: Vec<usize> = patch
            .fine_nodes
            .iter()
            .map(|&n| map.dof(n, 0).unwrap())
            .collect();
        let k_p = s.k_op.matrix().principal_submatrix(&keep);
        let c = constraint_matrix(&ctx, &patch, 1, patch.n_fine());
        let mut rng = rng::stream(3, "test-saddle");
        let load = rng::uniform_vector(&mut rng, patch.n_fine());
        let opts = SolveOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let direct = solve_saddle_direct(&k_p, &c, &[&load], &opts).unwrap();
        let iterative = solve_saddle_projected_cg(&k_p, &c, &[&load], &opts).unwrap();
        let diff: Vec<f64> = direct[0]
            .q
            .iter()
            .zip(&iterative[0].q)
            .map(|(a, b)| a - b)
            .collect();
        let rel = norm2(&diff) / norm2(&direct[0].q).max(1e-300);
        assert!(rel <= 1e-8, "paths disagree: {rel:e}");
    }

    #[test]
    fn ritz_projection_identity_and_stability() {
        let s = scalar_setup(100.0, 1, 2);
        let ctx = s.ctx();
        let (basis, _) = build_multiscale_basis(&ctx, 2).unwrap();
        let mut rng = rng::stream(7, "test-ritz");

        // Projection identity on multiscale vectors.
        let c0 = rng::uniform_vector(&mut rng, basis.dim());
        let v = basis.to_fine(&c0);
        let c1 = basis.ritz_project(&s.k_op, &v).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            assert!((a - b).abs() < 1e-8, "projection identity broke: {a} vs {b}");
        }

        // K-stability |R v|_K <= |v|_K and Galerkin orthogonality.
        for _ in 0..5 {
            let v = rng::uniform_vector(&mut rng, ctx.n_fine());
            let c = basis.ritz_project(&s.k_op, &v).unwrap();
            let rv = basis.to_fine(&c);
            let nv = s.k_op.norm(&v).unwrap();
            let nrv = s.k_op.norm(&rv).unwrap();
            assert!(nrv <= nv * (1.0 + 1e-10), "|Rv|_K = {nrv} > |v|_K = {nv}");
            let diff: Vec<f64> = v.iter().zip(&rv).map(|(a, b)| a - b).collect();
            let kdiff = s.k_op.apply(&diff);
            let defect = basis
                .project_rhs(&kdiff)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(defect <= 1e-8 * nv.max(1.0), "Galerkin defect {defect}");
        }
    }

    #[test]
    fn projected_operators_are_spd() {
        let s = scalar_setup(100.0, 3, 2);
        let (basis, _) = build_multiscale_basis(&s.ctx(), 2).unwrap();
        assert!(basis.m_ms().clone().cholesky().is_some());
        assert_eq!(basis.dim(), s.mesh.n_free());
        // Basis archive round trip.
        let data = basis.to_data();
        let restored = MultiscaleBasis::from_data(data).unwrap();
        assert_eq!(restored.dim(), basis.dim());
        let c = vec![1.0; basis.dim()];
        let a = basis.to_fine(&c);
        let b = restored.to_fine(&c);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn vector_model_correctors_constrain_componentwise() {
        let net = generate_fiber_network(&GeneratorConfig::new(100.0, 1))
            .unwrap()
            .assign_boundary(|x| x[0] == 0.0)
            .unwrap();
        let mesh = build_mesh(&net, 1).unwrap();
        let mass1 = assemble_mass(&net, 1).unwrap();
        let interp = build_interpolator(&mesh, &net, &mass1, true).unwrap();
        let model = StiffnessModel::Elastic {
            params: crate::operators::ElasticParams::new(100.0, 0.05).unwrap(),
            convention: Default::default(),
        };
        let k_op = model.assemble(&net).unwrap().eliminate_boundary(&net);
        let m_op = replicate_components(&mass1, 3).eliminate_boundary(&net);
        let ctx = LodContext {
            net: &net,
            mesh: &mesh,
            interp: &interp,
            k_op: &k_op,
            m_op: &m_op,
            model: &model,
            options: SolveOptions::default(),
        };
        let set = compute_correctors(&ctx, 1).unwrap();
        assert!(set.stats.max_constraint_violation <= 1e-9);
        let (basis, _) = build_multiscale_basis(&ctx, 1).unwrap();
        assert_eq!(basis.dim(), mesh.n_free() * 3);
    }
}
