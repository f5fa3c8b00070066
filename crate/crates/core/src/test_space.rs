//! Offline test space `W1 + W2 + W3_off` built from local adjoint problems.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::SparseOperator;
use crate::error::{Error, Result};
use crate::grid::CoarseTopology;
use crate::numerics::{at_mul, generalized_sym_eig, orthonormalize_columns, LocalSolver, MinEnergyExtension};
use crate::trial_space::TrialMatrix;

pub const DEFAULT_TEST_DROPTOL: f64 = 1e-10;

fn position(sorted: &[usize], dof: usize) -> usize {
    sorted
        .binary_search(&dof)
        .expect("dof belongs to the local index set")
}

/// Factored block-interior stiffness matrices, one per coarse block. Only
/// transposed solves are used here.
#[derive(Debug, Clone)]
pub struct BlockSolvers {
    solvers: Vec<LocalSolver>,
}

impl BlockSolvers {
    pub fn new(topo: &CoarseTopology, op: &SparseOperator) -> Result<Self> {
        let solvers = topo
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let a = op.stiffness.submatrix(&b.interior, &b.interior)?;
                LocalSolver::new(a, format!("block {k}"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { solvers })
    }

    pub fn get(&self, block: usize) -> &LocalSolver {
        &self.solvers[block]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BubbleSource {
    /// Right-hand side is the nodal vector of the trial function.
    #[default]
    Euclidean,
    /// Right-hand side is the mass-weighted load of the trial function.
    Mass,
}

impl std::str::FromStr for BubbleSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Self::Euclidean),
            "mass" => Ok(Self::Mass),
            other => Err(Error::Config(format!("unknown bubble source '{other}'"))),
        }
    }
}

/// Adjoint bubbles of one block, stored over the block interior DOFs.
#[derive(Debug, Clone)]
pub struct TestSnapshotW1 {
    pub block: usize,
    /// Trial column index of each bubble's source.
    pub sources: Vec<usize>,
    pub columns: DMatrix<f64>,
}

/// Bubbles `A^T psi = xi` inside every block, one per overlapping trial column.
pub fn build_w1(
    topo: &CoarseTopology,
    op: &SparseOperator,
    solvers: &BlockSolvers,
    xi: &TrialMatrix,
    source: BubbleSource,
) -> Result<Vec<TestSnapshotW1>> {
    let weighted: Option<DMatrix<f64>> = match source {
        BubbleSource::Euclidean => None,
        BubbleSource::Mass => Some(op.mass.mul_dense(&xi.matrix)),
    };
    let loads = weighted.as_ref().unwrap_or(&xi.matrix);
    topo.blocks
        .iter()
        .enumerate()
        .map(|(k, block)| {
            let sources: Vec<usize> = xi
                .labels
                .iter()
                .enumerate()
                .filter(|(_, (l, _))| block.corners.contains(l))
                .map(|(c, _)| c)
                .collect();
            let mut columns = DMatrix::zeros(block.interior.len(), sources.len());
            for (q, &c) in sources.iter().enumerate() {
                let rhs: Vec<f64> = block.interior.iter().map(|&d| loads[(d, c)]).collect();
                let psi = solvers.get(k).solve_transpose(&rhs)?;
                columns.column_mut(q).copy_from_slice(&psi);
            }
            Ok(TestSnapshotW1 {
                block: k,
                sources,
                columns,
            })
        })
        .collect()
}

/// Adjoint-harmonic extension of a coarse node's hat, stored over the neighborhood closure.
#[derive(Debug, Clone)]
pub struct TestSnapshotW2 {
    pub node: usize,
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

/// Solve `A^T psi = 0` in each block with trace `g` on the block boundary.
fn adjoint_harmonic_in_block(
    topo: &CoarseTopology,
    op: &SparseOperator,
    solvers: &BlockSolvers,
    block: usize,
    trace: impl Fn(usize) -> f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let b = &topo.blocks[block];
    let boundary = b.rect.boundary_dofs(&topo.mesh);
    let g: Vec<f64> = boundary.iter().map(|&d| trace(d)).collect();
    // (A^T)_{I,dK} g = (A_{dK,I})^T g
    let a_bi = op.stiffness.submatrix(&boundary, &b.interior)?;
    let rhs: Vec<f64> = a_bi.tr_mul_vec(&g).iter().map(|v| -v).collect();
    let x = solvers.get(block).solve_transpose(&rhs)?;
    Ok((boundary, x))
}

pub fn build_w2(
    topo: &CoarseTopology,
    op: &SparseOperator,
    solvers: &BlockSolvers,
) -> Result<Vec<TestSnapshotW2>> {
    let mesh = &topo.mesh;
    topo.interior_nodes()
        .map(|l| {
            let cn = &topo.nodes[l];
            let mut values = vec![0.0; cn.closure.len()];
            for &k in &cn.blocks {
                let hat = |d: usize| {
                    let (i, j) = mesh.dof_coords(d);
                    topo.hat(l, i, j)
                };
                let (boundary, x) = adjoint_harmonic_in_block(topo, op, solvers, k, hat)?;
                for &d in &boundary {
                    values[position(&cn.closure, d)] = hat(d);
                }
                for (&d, v) in topo.blocks[k].interior.iter().zip(x) {
                    values[position(&cn.closure, d)] = v;
                }
            }
            Ok(TestSnapshotW2 {
                node: l,
                support: cn.closure.clone(),
                values,
            })
        })
        .collect()
}

/// Edge snapshots with discrete delta traces, stored over the edge region `D_k`.
#[derive(Debug, Clone)]
pub struct TestSnapshotW3 {
    pub edge: usize,
    pub region: Vec<usize>,
    /// Position in `region` of each interior edge node, in order along the edge.
    pub edge_positions: Vec<usize>,
    /// `region.len() x (r - 1)`.
    pub columns: DMatrix<f64>,
}

pub fn build_w3_snapshots(
    topo: &CoarseTopology,
    op: &SparseOperator,
    solvers: &BlockSolvers,
    edge: usize,
) -> Result<TestSnapshotW3> {
    let e = &topo.edges[edge];
    let region = e.region.clone();
    let edge_positions: Vec<usize> = e.nodes.iter().map(|&d| position(&region, d)).collect();
    let mut columns = DMatrix::zeros(region.len(), e.nodes.len());
    for &k in &e.blocks {
        let interior = &topo.blocks[k].interior;
        // rows of A at the edge nodes restricted to the block interior
        let a_ei = op.stiffness.submatrix(&e.nodes, interior)?;
        let a_ei = a_ei.to_dense();
        let solver = solvers.get(k);
        let interior_pos: Vec<usize> = interior.iter().map(|&d| position(&region, d)).collect();
        for p in 0..e.nodes.len() {
            let rhs: Vec<f64> = a_ei.row(p).iter().map(|v| -v).collect();
            let x = solver.solve_transpose(&rhs)?;
            for (&q, v) in interior_pos.iter().zip(x) {
                columns[(q, p)] = v;
            }
        }
    }
    for (p, &q) in edge_positions.iter().enumerate() {
        columns[(q, p)] = 1.0;
    }
    Ok(TestSnapshotW3 {
        edge,
        region,
        edge_positions,
        columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Eigenproblem {
    /// Energy against the edge trace mass.
    One,
    /// Minimum-energy extension against the snapshot energy.
    Two,
}

impl Eigenproblem {
    pub fn id(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }
}

impl TryFrom<u8> for Eigenproblem {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            other => Err(Error::Config(format!("eigenproblem must be 1 or 2, got {other}"))),
        }
    }
}

impl fmt::Display for Eigenproblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

#[derive(Debug, Clone)]
pub struct EdgeSpectralResult {
    pub edge: usize,
    pub eigenproblem: Eigenproblem,
    /// Ascending.
    pub values: Vec<f64>,
    /// Snapshot coefficients of each eigenvector, column by column.
    pub vectors: DMatrix<f64>,
}

impl EdgeSpectralResult {
    pub fn selected(&self, l: usize) -> usize {
        l.min(self.values.len())
    }

    /// Smallest eigenvalue whose eigenvector is left out, `+inf` when all are kept.
    pub fn lambda_min_excluded(&self, l: usize) -> f64 {
        self.values.get(l).copied().unwrap_or(f64::INFINITY)
    }

    /// The first `l` selected basis vectors over the edge region.
    pub fn basis(&self, snaps: &TestSnapshotW3, l: usize) -> DMatrix<f64> {
        let k = self.selected(l);
        &snaps.columns * self.vectors.columns(0, k)
    }
}

fn edge_mass(len: usize, h: f64) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(len, len);
    for p in 0..len {
        t[(p, p)] = 4.0 * h / 6.0;
        if p + 1 < len {
            t[(p, p + 1)] = h / 6.0;
            t[(p + 1, p)] = h / 6.0;
        }
    }
    t
}

pub fn eigenproblem_1(op: &SparseOperator, snaps: &TestSnapshotW3) -> Result<EdgeSpectralResult> {
    let a_loc = op.stiffness.submatrix(&snaps.region, &snaps.region)?;
    let y = a_loc.tr_mul_dense(&snaps.columns);
    let s = at_mul(&y, &y);
    let t = edge_mass(snaps.edge_positions.len(), op.mesh.h());
    let eig = generalized_sym_eig(&s, &t).map_err(|_| Error::SingularMetric {
        context: format!("edge mass of edge {}", snaps.edge),
    })?;
    Ok(EdgeSpectralResult {
        edge: snaps.edge,
        eigenproblem: Eigenproblem::One,
        values: eig.values,
        vectors: eig.vectors,
    })
}

pub fn eigenproblem_2(op: &SparseOperator, snaps: &TestSnapshotW3) -> Result<EdgeSpectralResult> {
    let a_loc = op.stiffness.submatrix(&snaps.region, &snaps.region)?;
    let b_loc = a_loc.mul_sparse(&a_loc.transpose());
    let ext = MinEnergyExtension::new(&b_loc, &snaps.edge_positions)?;
    let ne = snaps.edge_positions.len();
    let mut extended = DMatrix::zeros(snaps.region.len(), ne);
    let mut trace = vec![0.0; ne];
    for p in 0..ne {
        trace.iter_mut().for_each(|t| *t = 0.0);
        trace[p] = 1.0;
        let v = ext.extend(&trace)?;
        extended.set_column(p, &v);
    }
    let y = a_loc.tr_mul_dense(&snaps.columns);
    let y_ext = a_loc.tr_mul_dense(&extended);
    let s = at_mul(&y, &y);
    let s_ext = at_mul(&y_ext, &y_ext);
    let eig = generalized_sym_eig(&s_ext, &s).map_err(|_| Error::SingularMetric {
        context: format!("snapshot energy of edge {}", snaps.edge),
    })?;
    Ok(EdgeSpectralResult {
        edge: snaps.edge,
        eigenproblem: Eigenproblem::Two,
        values: eig.values,
        vectors: eig.vectors,
    })
}

pub fn edge_spectrum(
    op: &SparseOperator,
    snaps: &TestSnapshotW3,
    which: Eigenproblem,
) -> Result<EdgeSpectralResult> {
    match which {
        Eigenproblem::One => eigenproblem_1(op, snaps),
        Eigenproblem::Two => eigenproblem_2(op, snaps),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSummary {
    pub edge: usize,
    pub selected: usize,
    pub lambda_min_excluded: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub eigenproblem: Eigenproblem,
    pub per_edge: Vec<EdgeSummary>,
    /// Minimum over edges of the smallest excluded eigenvalue; `+inf` if nothing was excluded.
    pub min_lambda_excluded: f64,
    pub w1_columns: usize,
    pub w2_columns: usize,
    pub w3_columns: usize,
    /// Columns kept after orthonormalization.
    pub retained: usize,
}

#[derive(Debug, Clone)]
pub struct TestSpace {
    /// Orthonormal columns.
    pub theta: DMatrix<f64>,
    pub report: SpectralReport,
}

/// Concatenate `W1`, `W2` and the selected `W3` columns and orthonormalize.
pub fn assemble_test_matrix(
    topo: &CoarseTopology,
    w1: &[TestSnapshotW1],
    w2: &[TestSnapshotW2],
    w3: &[TestSnapshotW3],
    spectra: &[EdgeSpectralResult],
    l: usize,
    droptol: f64,
) -> TestSpace {
    let n = topo.mesh.num_dofs();
    let n1: usize = w1.iter().map(|s| s.columns.ncols()).sum();
    let n2 = w2.len();
    let n3: usize = spectra.iter().map(|s| s.selected(l)).sum();
    let mut raw = DMatrix::zeros(n, n1 + n2 + n3);
    let mut c = 0;
    for s in w1 {
        let interior = &topo.blocks[s.block].interior;
        for q in 0..s.columns.ncols() {
            for (p, &d) in interior.iter().enumerate() {
                raw[(d, c)] = s.columns[(p, q)];
            }
            c += 1;
        }
    }
    for s in w2 {
        for (&d, &v) in s.support.iter().zip(&s.values) {
            raw[(d, c)] = v;
        }
        c += 1;
    }
    let mut per_edge = Vec::with_capacity(spectra.len());
    let mut min_lambda = f64::INFINITY;
    for (snaps, spec) in w3.iter().zip(spectra) {
        debug_assert_eq!(snaps.edge, spec.edge);
        let basis = spec.basis(snaps, l);
        for q in 0..basis.ncols() {
            for (p, &d) in snaps.region.iter().enumerate() {
                raw[(d, c)] = basis[(p, q)];
            }
            c += 1;
        }
        let lam = spec.lambda_min_excluded(l);
        min_lambda = min_lambda.min(lam);
        per_edge.push(EdgeSummary {
            edge: spec.edge,
            selected: spec.selected(l),
            lambda_min_excluded: lam,
        });
    }
    let theta = orthonormalize_columns(&raw, droptol);
    let eigenproblem = spectra.first().map_or(Eigenproblem::One, |s| s.eigenproblem);
    let report = SpectralReport {
        eigenproblem,
        per_edge,
        min_lambda_excluded: min_lambda,
        w1_columns: n1,
        w2_columns: n2,
        w3_columns: n3,
        retained: theta.ncols(),
    };
    TestSpace { theta, report }
}

/// Test-space ingredients that do not depend on the trial space.
#[derive(Debug, Clone)]
pub struct TestOffline {
    pub solvers: BlockSolvers,
    pub w2: Vec<TestSnapshotW2>,
    pub w3: Vec<TestSnapshotW3>,
}

impl TestOffline {
    pub fn build(topo: &CoarseTopology, op: &SparseOperator) -> Result<Self> {
        let solvers = BlockSolvers::new(topo, op)?;
        let w2 = build_w2(topo, op, &solvers)?;
        let w3 = (0..topo.edges.len())
            .map(|k| build_w3_snapshots(topo, op, &solvers, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { solvers, w2, w3 })
    }

    pub fn spectra(&self, op: &SparseOperator, which: Eigenproblem) -> Result<Vec<EdgeSpectralResult>> {
        self.w3.iter().map(|s| edge_spectrum(op, s, which)).collect()
    }
}

/// Per-edge eigenvalue table: `edge,index,eigenvalue,selected`.
pub fn write_eigen_csv<W: Write>(out: &mut W, spectra: &[EdgeSpectralResult], l: usize) -> Result<()> {
    writeln!(out, "edge,index,eigenvalue,selected")?;
    for s in spectra {
        for (i, v) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{:.12e},{}", s.edge, i, v, u8::from(i < s.selected(l)))?;
        }
    }
    Ok(())
}
