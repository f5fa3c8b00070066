//! Reduced mixed system
//!
//! ```text
//! [ Θᵀ A Aᵀ Θ   Θᵀ A Ξ ] [w]   [Θᵀ f]
//! [ Ξᵀ Aᵀ Θ     0      ] [u] = [ 0  ]
//! ```
//!
//! error measurement, inf-sup estimate and online test enrichment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{FineSolver, SparseOperator};
use crate::error::{Error, Result};
use crate::grid::CoarseTopology;
use crate::numerics::sparse::{dot, norm};
use crate::numerics::{
    at_mul, extend_orthonormal, generalized_sym_eig, orthonormalize_columns, BandedLu, CsrMatrix, LocalSolver,
};

/// Column basis of either the test or the trial space.
#[derive(Debug, Clone, Copy)]
pub enum Basis<'a> {
    /// All fine DOFs.
    Identity(usize),
    Dense(&'a DMatrix<f64>),
}

impl Basis<'_> {
    fn to_dense(self) -> DMatrix<f64> {
        match self {
            Basis::Identity(n) => DMatrix::identity(n, n),
            Basis::Dense(m) => m.clone(),
        }
    }
}

/// Reduced blocks kept for incremental updates of the test space.
#[derive(Debug, Clone)]
pub struct ReducedBlocks {
    pub theta: DMatrix<f64>,
    /// `A^T Θ`.
    pub at_theta: DMatrix<f64>,
    pub g_ww: DMatrix<f64>,
    pub g_wu: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SaddleState {
    /// `None` for the full-space solve.
    pub blocks: Option<ReducedBlocks>,
    pub w: DVector<f64>,
    pub u: DVector<f64>,
    /// `Θ w` on the fine grid.
    pub theta_w: Vec<f64>,
    /// `Ξ u` on the fine grid.
    pub xi_u: Vec<f64>,
}

pub fn solve_coupled(op: &SparseOperator, theta: Basis, xi: Basis) -> Result<SaddleState> {
    if let (Basis::Identity(_), Basis::Identity(_)) = (theta, xi) {
        return full_space_solve(op);
    }
    let xi_dense;
    let xi_ref = match xi {
        Basis::Dense(m) => m,
        Basis::Identity(n) => {
            xi_dense = DMatrix::identity(n, n);
            &xi_dense
        }
    };
    let theta = theta.to_dense();
    let at_theta = op.stiffness.tr_mul_dense(&theta);
    let g_ww = at_mul(&at_theta, &at_theta);
    let g_wu = at_mul(&at_theta, xi_ref);
    let f = DVector::from_column_slice(&op.load);
    let rhs = theta.tr_mul(&f);
    let blocks = ReducedBlocks {
        theta,
        at_theta,
        g_ww,
        g_wu,
        rhs,
    };
    let (w, u) = solve_reduced(&blocks)?;
    let theta_w = (&blocks.theta * &w).as_slice().to_vec();
    let xi_u = (xi_ref * &u).as_slice().to_vec();
    Ok(SaddleState {
        blocks: Some(blocks),
        w,
        u,
        theta_w,
        xi_u,
    })
}

fn solve_reduced(b: &ReducedBlocks) -> Result<(DVector<f64>, DVector<f64>)> {
    let k = b.g_ww.nrows();
    let m = b.g_wu.ncols();
    let mut kkt = DMatrix::zeros(k + m, k + m);
    kkt.view_mut((0, 0), (k, k)).copy_from(&b.g_ww);
    kkt.view_mut((0, k), (k, m)).copy_from(&b.g_wu);
    kkt.view_mut((k, 0), (m, k)).copy_from(&b.g_wu.transpose());
    let mut rhs = DVector::zeros(k + m);
    rhs.rows_mut(0, k).copy_from(&b.rhs);
    let lu = kkt.clone().lu();
    let diag = lu.u().diagonal().abs();
    let largest = diag.max();
    if !(largest > 0.0) || diag.min() <= 1e-14 * largest {
        return Err(Error::SingularReduced { test: k, trial: m });
    }
    let mut x = lu.solve(&rhs).ok_or(Error::SingularReduced { test: k, trial: m })?;
    // one refinement step
    let r = &rhs - &kkt * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularReduced { test: k, trial: m });
    }
    Ok((x.rows(0, k).into_owned(), x.rows(k, m).into_owned()))
}

/// Both spaces equal to the full fine space: solve the interleaved sparse
/// system with a banded factorization.
fn full_space_solve(op: &SparseOperator) -> Result<SaddleState> {
    let n = op.mesh.num_dofs();
    let a = &op.stiffness;
    let at = a.transpose();
    let aat = a.mul_sparse(&at);
    let mut t = Vec::with_capacity(aat.nnz() + 2 * a.nnz());
    for i in 0..n {
        for (j, v) in aat.row(i) {
            t.push((2 * i, 2 * j, v));
        }
        for (j, v) in a.row(i) {
            t.push((2 * i, 2 * j + 1, v));
        }
        for (j, v) in at.row(i) {
            t.push((2 * i + 1, 2 * j, v));
        }
    }
    let kkt = CsrMatrix::from_triplets(2 * n, 2 * n, &t);
    let lu = BandedLu::factor(&kkt).map_err(|_| Error::SingularReduced { test: n, trial: n })?;
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        rhs[2 * i] = op.load[i];
    }
    let mut x = lu.solve(&rhs);
    for _ in 0..2 {
        let kx = kkt.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
    }
    let w: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
    let u: Vec<f64> = (0..n).map(|i| x[2 * i + 1]).collect();
    Ok(SaddleState {
        blocks: None,
        theta_w: w.clone(),
        xi_u: u.clone(),
        w: DVector::from_vec(w),
        u: DVector::from_vec(u),
    })
}

impl SaddleState {
    /// Append orthonormal test columns (already orthogonal to `Θ`) and re-solve.
    fn append_and_resolve(&mut self, op: &SparseOperator, xi: &DMatrix<f64>, first_new: usize) -> Result<()> {
        let b = self
            .blocks
            .as_mut()
            .expect("enrichment needs a reduced state");
        let k_old = b.at_theta.ncols();
        let k_new = b.theta.ncols();
        if k_new == first_new {
            return Ok(());
        }
        debug_assert_eq!(k_old, first_new);
        let fresh = b.theta.columns(first_new, k_new - first_new).into_owned();
        let y_new = op.stiffness.tr_mul_dense(&fresh);
        let cross = at_mul(&b.at_theta, &y_new);
        let corner = at_mul(&y_new, &y_new);
        let mut g = DMatrix::zeros(k_new, k_new);
        g.view_mut((0, 0), (k_old, k_old)).copy_from(&b.g_ww);
        g.view_mut((0, k_old), (k_old, k_new - k_old)).copy_from(&cross);
        g.view_mut((k_old, 0), (k_new - k_old, k_old)).copy_from(&cross.transpose());
        g.view_mut((k_old, k_old), (k_new - k_old, k_new - k_old)).copy_from(&corner);
        let mut g_wu = DMatrix::zeros(k_new, xi.ncols());
        g_wu.rows_mut(0, k_old).copy_from(&b.g_wu);
        g_wu.rows_mut(k_old, k_new - k_old).copy_from(&at_mul(&y_new, xi));
        let f = DVector::from_column_slice(&op.load);
        let mut rhs = DVector::zeros(k_new);
        rhs.rows_mut(0, k_old).copy_from(&b.rhs);
        rhs.rows_mut(k_old, k_new - k_old).copy_from(&fresh.tr_mul(&f));
        let mut at_theta = std::mem::replace(&mut b.at_theta, DMatrix::zeros(0, 0))
            .resize_horizontally(k_new, 0.0);
        at_theta.columns_mut(k_old, k_new - k_old).copy_from(&y_new);
        b.at_theta = at_theta;
        b.g_ww = g;
        b.g_wu = g_wu;
        b.rhs = rhs;
        let (w, u) = solve_reduced(b)?;
        self.theta_w = (&b.theta * &w).as_slice().to_vec();
        self.xi_u = (xi * &u).as_slice().to_vec();
        self.w = w;
        self.u = u;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    #[default]
    Euclidean,
    Mass,
}

impl std::str::FromStr for ProjectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Self::Euclidean),
            "mass" => Ok(Self::Mass),
            other => Err(Error::Config(format!("unknown projection '{other}'"))),
        }
    }
}

/// Best approximation onto the trial span, in the chosen inner product.
#[derive(Debug, Clone)]
pub struct Projector {
    mode: ProjectionMode,
    basis: DMatrix<f64>,
    mass: Option<CsrMatrix>,
}

impl Projector {
    pub fn new(op: &SparseOperator, xi: Basis, mode: ProjectionMode) -> Result<Self> {
        let xi = xi.to_dense();
        match mode {
            ProjectionMode::Euclidean => Ok(Self {
                mode,
                basis: orthonormalize_columns(&xi, 1e-12),
                mass: None,
            }),
            ProjectionMode::Mass => {
                // M-orthonormal basis via the Cholesky factor of the Gram matrix
                let q = orthonormalize_columns(&xi, 1e-12);
                let gram = at_mul(&q, &op.mass.mul_dense(&q));
                let chol = gram.cholesky().ok_or_else(|| Error::SingularMetric {
                    context: "trial mass Gram matrix".into(),
                })?;
                let linv = chol
                    .l()
                    .solve_lower_triangular(&DMatrix::identity(q.ncols(), q.ncols()))
                    .expect("Cholesky factor is nonsingular");
                Ok(Self {
                    mode,
                    basis: q * linv.transpose(),
                    mass: Some(op.mass.clone()),
                })
            }
        }
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match &self.mass {
            None => norm(v),
            Some(m) => dot(v, &m.mul_vec(v)).max(0.0).sqrt(),
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let weighted = match &self.mass {
            None => v.to_vec(),
            Some(m) => m.mul_vec(v),
        };
        let c = self.basis.tr_mul(&DVector::from_column_slice(&weighted));
        (&self.basis * c).as_slice().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err_ms_pct: f64,
    pub err_proj_pct: f64,
    pub w_norm: f64,
    pub min_lambda_excluded: Option<f64>,
    pub infsup: Option<f64>,
    pub online_iter: usize,
    /// `‖A A^T Θw + A Ξu − f‖ / ‖f‖`.
    pub residual: f64,
}

pub fn error_report(
    state: &SaddleState,
    op: &SparseOperator,
    u_h: &[f64],
    projector: &Projector,
) -> ErrorReport {
    let denom = projector.norm(u_h);
    let diff: Vec<f64> = u_h.iter().zip(&state.xi_u).map(|(a, b)| a - b).collect();
    let proj = projector.project(u_h);
    let pdiff: Vec<f64> = u_h.iter().zip(&proj).map(|(a, b)| a - b).collect();
    let (err_ms_pct, err_proj_pct) = if denom > 0.0 {
        (
            100.0 * projector.norm(&diff) / denom,
            100.0 * projector.norm(&pdiff) / denom,
        )
    } else {
        (0.0, 0.0)
    };
    let fnorm = norm(&op.load);
    let res = norm(&global_residual(state, op));
    ErrorReport {
        err_ms_pct,
        err_proj_pct,
        w_norm: state.w.norm(),
        min_lambda_excluded: None,
        infsup: None,
        online_iter: 0,
        residual: if fnorm > 0.0 { res / fnorm } else { res },
    }
}

/// `min_z ‖P_Θ z‖ / ‖z‖` over `z = A^{-T} Ξ c`, norms induced by `A A^T`.
pub fn infsup_estimate(
    op: &SparseOperator,
    fine: &FineSolver,
    theta: &DMatrix<f64>,
    xi: &DMatrix<f64>,
) -> Result<f64> {
    let n = op.mesh.num_dofs();
    let mut lifted = DMatrix::zeros(n, xi.ncols());
    for q in 0..xi.ncols() {
        let z = fine.solve_transpose(xi.column(q).as_slice()).map_err(|e| match e {
            Error::SolverFailure { residual, target } => Error::LocalSolver {
                region: format!("inf-sup lift of trial column {q}"),
                reason: format!("relative residual {residual:e} above {target:e}"),
            },
            other => other,
        })?;
        lifted.set_column(q, &DVector::from_vec(op.stiffness.tr_mul_vec(&z)));
    }
    let y = op.stiffness.tr_mul_dense(theta);
    let g1 = at_mul(&lifted, &lifted);
    let p = at_mul(&y, &lifted);
    let g_ww = at_mul(&y, &y);
    let g2 = match g_ww.clone().cholesky() {
        Some(ch) => {
            let s = ch.solve(&p);
            at_mul(&p, &s)
        }
        None => {
            let qy = orthonormalize_columns(&y, 1e-12);
            let c = at_mul(&qy, &lifted);
            at_mul(&c, &c)
        }
    };
    let eig = generalized_sym_eig(&g2, &g1)?;
    Ok(eig.values.first().copied().unwrap_or(0.0).clamp(0.0, 1.0).sqrt())
}

/// `r = A A^T Θw + A Ξu − f` on all fine DOFs.
pub fn global_residual(state: &SaddleState, op: &SparseOperator) -> Vec<f64> {
    let atw = op.stiffness.tr_mul_vec(&state.theta_w);
    let sum: Vec<f64> = atw.iter().zip(&state.xi_u).map(|(a, b)| a + b).collect();
    op.stiffness
        .mul_vec(&sum)
        .iter()
        .zip(&op.load)
        .map(|(a, f)| a - f)
        .collect()
}

pub fn residual_local(state: &SaddleState, op: &SparseOperator, topo: &CoarseTopology, node: usize) -> Vec<f64> {
    let r = global_residual(state, op);
    topo.nodes[node].interior.iter().map(|&d| r[d]).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct OnlineOptions {
    /// Recompute the residual after each color class instead of once per sweep.
    pub residual_per_class: bool,
    /// Local residuals below `tol * ‖f‖` contribute no column.
    pub tol: f64,
    pub droptol: f64,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self {
            residual_per_class: true,
            tol: 1e-12,
            droptol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OnlineStep {
    pub added: usize,
    /// Relative global residual after the sweep.
    pub residual: f64,
}

/// The product `A A^T`, formed sparsely once per operator.
pub fn normal_matrix(op: &SparseOperator) -> CsrMatrix {
    op.stiffness.mul_sparse(&op.stiffness.transpose())
}

fn local_online_columns(
    op: &SparseOperator,
    topo: &CoarseTopology,
    normal: &CsrMatrix,
    residual: &[f64],
    nodes: &[usize],
    threshold: f64,
) -> Result<DMatrix<f64>> {
    let n = op.mesh.num_dofs();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for &l in nodes {
        let interior = &topo.nodes[l].interior;
        let r: Vec<f64> = interior.iter().map(|&d| residual[d]).collect();
        if norm(&r) <= threshold {
            continue;
        }
        let local = normal.submatrix(interior, interior)?;
        let phi = LocalSolver::new(local, format!("online neighborhood {l}"))?.solve(&r)?;
        let mut col = DVector::zeros(n);
        for (&d, v) in interior.iter().zip(phi) {
            col[d] = v;
        }
        cols.push(col);
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// One online iteration: a sweep over the four color classes of coarse nodes.
pub fn online_enrich(
    state: &mut SaddleState,
    op: &SparseOperator,
    topo: &CoarseTopology,
    xi: &DMatrix<f64>,
    normal: &CsrMatrix,
    opts: &OnlineOptions,
) -> Result<OnlineStep> {
    let fnorm = norm(&op.load);
    let threshold = opts.tol * fnorm;
    let classes = topo.coloring();
    let mut added = 0;
    if opts.residual_per_class {
        for class in &classes {
            let r = global_residual(state, op);
            let new = local_online_columns(op, topo, normal, &r, class, threshold)?;
            added += append(state, op, xi, &new, opts.droptol)?;
        }
    } else {
        let r = global_residual(state, op);
        let all: Vec<usize> = classes.concat();
        let new = local_online_columns(op, topo, normal, &r, &all, threshold)?;
        added += append(state, op, xi, &new, opts.droptol)?;
    }
    let res = norm(&global_residual(state, op));
    Ok(OnlineStep {
        added,
        residual: if fnorm > 0.0 { res / fnorm } else { res },
    })
}

fn append(
    state: &mut SaddleState,
    op: &SparseOperator,
    xi: &DMatrix<f64>,
    new: &DMatrix<f64>,
    droptol: f64,
) -> Result<usize> {
    if new.ncols() == 0 {
        return Ok(0);
    }
    let blocks = state
        .blocks
        .as_mut()
        .expect("online enrichment needs a reduced state");
    let first_new = blocks.theta.ncols();
    let added = extend_orthonormal(&mut blocks.theta, new, droptol);
    state.append_and_resolve(op, xi, first_new)?;
    Ok(added)
}
