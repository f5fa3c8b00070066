//! Offline trial space: neighborhood snapshots from boundary-delta problems,
//! spectral reduction, and localization by a partition of unity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::SparseOperator;
use crate::error::{Error, Result};
use crate::grid::CoarseTopology;
use crate::numerics::{generalized_sym_eig, LocalSolver};

/// Snapshots of one coarse neighborhood, stored over its closure DOFs.
#[derive(Debug, Clone)]
pub struct TrialSnapshotSet {
    pub node: usize,
    /// Neighborhood boundary DOFs, one snapshot each.
    pub boundary: Vec<usize>,
    /// `closure.len() x boundary.len()`.
    pub columns: DMatrix<f64>,
}

fn position(sorted: &[usize], dof: usize) -> usize {
    sorted
        .binary_search(&dof)
        .expect("dof belongs to the local index set")
}

/// Local problems `A phi = 0` inside the neighborhood with a discrete delta on its boundary.
pub fn trial_snapshots(
    topo: &CoarseTopology,
    op: &SparseOperator,
    node: usize,
) -> Result<TrialSnapshotSet> {
    let cn = &topo.nodes[node];
    let nb = cn.boundary.len();
    let mut columns = DMatrix::zeros(cn.closure.len(), nb);
    if nb == 0 {
        return Ok(TrialSnapshotSet {
            node,
            boundary: Vec::new(),
            columns,
        });
    }
    let a_ii = op.stiffness.submatrix(&cn.interior, &cn.interior)?;
    let a_ib = op.stiffness.submatrix(&cn.interior, &cn.boundary)?;
    let solver = LocalSolver::new(a_ii, format!("neighborhood {node}"))?;
    let a_ib = a_ib.to_dense();
    let interior_pos: Vec<usize> = cn.interior.iter().map(|&d| position(&cn.closure, d)).collect();
    for (k, &b) in cn.boundary.iter().enumerate() {
        let rhs: Vec<f64> = a_ib.column(k).iter().map(|v| -v).collect();
        let x = solver.solve(&rhs)?;
        columns[(position(&cn.closure, b), k)] = 1.0;
        for (p, v) in interior_pos.iter().zip(x) {
            columns[(*p, k)] = v;
        }
    }
    Ok(TrialSnapshotSet {
        node,
        boundary: cn.boundary.clone(),
        columns,
    })
}

/// Spectrally reduced vectors of one neighborhood.
#[derive(Debug, Clone)]
pub struct ReducedNeighborhood {
    pub node: usize,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// `closure.len() x m_l` reduced vectors `xi_{l,j}`.
    pub vectors: DMatrix<f64>,
}

/// Reduce snapshots with `(A_snap^T A_snap) v = λ M_snap v`, keeping the `m` smallest.
pub fn trial_eigenbasis(
    topo: &CoarseTopology,
    op: &SparseOperator,
    snapshots: &TrialSnapshotSet,
    m: usize,
) -> Result<ReducedNeighborhood> {
    let cn = &topo.nodes[snapshots.node];
    let count = snapshots.columns.ncols();
    let keep = m.min(count);
    if count == 0 {
        return Ok(ReducedNeighborhood {
            node: snapshots.node,
            eigenvalues: Vec::new(),
            vectors: DMatrix::zeros(cn.closure.len(), 0),
        });
    }
    let a_loc = op.stiffness.submatrix(&cn.closure, &cn.closure)?;
    let m_loc = op.mass.submatrix(&cn.closure, &cn.closure)?;
    let phi = &snapshots.columns;
    let a_snap = phi.tr_mul(&a_loc.mul_dense(phi));
    let m_snap = phi.tr_mul(&m_loc.mul_dense(phi));
    let s = a_snap.tr_mul(&a_snap);
    let eig = generalized_sym_eig(&s, &m_snap).map_err(|_| Error::SingularMetric {
        context: format!("trial snapshot mass of neighborhood {}", snapshots.node),
    })?;
    let vectors = phi * eig.vectors.columns(0, keep);
    Ok(ReducedNeighborhood {
        node: snapshots.node,
        eigenvalues: eig.values,
        vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PouMode {
    /// Locally A-harmonic functions with bilinear-hat traces on coarse edges.
    #[default]
    Multiscale,
    /// Plain bilinear hats.
    Bilinear,
}

impl std::str::FromStr for PouMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiscale" | "ms" => Ok(Self::Multiscale),
            "bilinear" | "hat" => Ok(Self::Bilinear),
            other => Err(Error::Config(format!("unknown partition of unity '{other}'"))),
        }
    }
}

/// One function per coarse node, stored over the neighborhood closure DOFs.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub mode: PouMode,
    pub values: Vec<Vec<f64>>,
}

impl PartitionOfUnity {
    pub fn to_global(&self, topo: &CoarseTopology, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; topo.mesh.num_dofs()];
        for (&d, &v) in topo.nodes[node].closure.iter().zip(&self.values[node]) {
            out[d] = v;
        }
        out
    }
}

/// Partition of unity subordinate to the coarse neighborhoods.
///
/// In multiscale mode each function solves `A chi = 0` inside every block with
/// the bilinear hat as boundary data. The local solves use the operator before
/// Dirichlet elimination so the functions sum to one up to the domain boundary.
pub fn partition_of_unity(
    topo: &CoarseTopology,
    op: &SparseOperator,
    mode: PouMode,
) -> Result<PartitionOfUnity> {
    let mesh = &topo.mesh;
    let mut values: Vec<Vec<f64>> = topo
        .nodes
        .iter()
        .enumerate()
        .map(|(l, cn)| {
            cn.closure
                .iter()
                .map(|&d| {
                    let (i, j) = mesh.dof_coords(d);
                    topo.hat(l, i, j)
                })
                .collect()
        })
        .collect();
    if mode == PouMode::Bilinear {
        return Ok(PartitionOfUnity { mode, values });
    }
    for (k, block) in topo.blocks.iter().enumerate() {
        let interior = block.rect.interior_lattice(mesh);
        let boundary: Vec<usize> = block
            .rect
            .closure_nodes()
            .filter(|&(i, j)| block.rect.on_boundary(i, j))
            .map(|(i, j)| mesh.lattice_index(i, j))
            .collect();
        let a_ii = op.lattice_stiffness.submatrix(&interior, &interior)?;
        let a_ib = op.lattice_stiffness.submatrix(&interior, &boundary)?;
        let solver = LocalSolver::new(a_ii, format!("block {k}"))?;
        for &l in &block.corners {
            let trace: Vec<f64> = boundary
                .iter()
                .map(|&node| {
                    let (i, j) = mesh.lattice_coords(node);
                    topo.hat(l, i, j)
                })
                .collect();
            let rhs: Vec<f64> = a_ib.mul_vec(&trace).iter().map(|v| -v).collect();
            let x = solver.solve(&rhs)?;
            let closure = &topo.nodes[l].closure;
            for (&node, v) in interior.iter().zip(x) {
                let (i, j) = mesh.lattice_coords(node);
                let d = mesh.dof(i, j).expect("block interior is interior");
                values[l][position(closure, d)] = v;
            }
        }
    }
    Ok(PartitionOfUnity { mode, values })
}

/// Offline trial space with reduced vectors kept up to `m_max` per neighborhood.
#[derive(Debug, Clone)]
pub struct TrialSpace {
    pub m_max: usize,
    pub pou: PartitionOfUnity,
    pub reduced: Vec<ReducedNeighborhood>,
}

/// Assembled trial matrix `Xi` with its column labels `(node, j)`.
#[derive(Debug, Clone)]
pub struct TrialMatrix {
    pub m: usize,
    pub matrix: DMatrix<f64>,
    pub labels: Vec<(usize, usize)>,
}

impl TrialSpace {
    pub fn build(
        topo: &CoarseTopology,
        op: &SparseOperator,
        m_max: usize,
        pou_mode: PouMode,
    ) -> Result<Self> {
        let pou = partition_of_unity(topo, op, pou_mode)?;
        let reduced = (0..topo.nodes.len())
            .map(|l| {
                let snaps = trial_snapshots(topo, op, l)?;
                trial_eigenbasis(topo, op, &snaps, m_max)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { m_max, pou, reduced })
    }

    /// Columns `chi_l * xi_{l,j}` for `j < m`, neighborhood-major.
    pub fn matrix(&self, topo: &CoarseTopology, m: usize) -> TrialMatrix {
        assert!(m <= self.m_max, "requested {m} trial vectors, built {}", self.m_max);
        assemble_trial_matrix(topo, &self.reduced, &self.pou, m)
    }
}

/// Nodal products of partition-of-unity functions and reduced vectors.
pub fn assemble_trial_matrix(
    topo: &CoarseTopology,
    reduced: &[ReducedNeighborhood],
    pou: &PartitionOfUnity,
    m: usize,
) -> TrialMatrix {
    let labels: Vec<(usize, usize)> = reduced
        .iter()
        .flat_map(|r| (0..m.min(r.vectors.ncols())).map(move |j| (r.node, j)))
        .collect();
    let mut matrix = DMatrix::zeros(topo.mesh.num_dofs(), labels.len());
    for (c, &(l, j)) in labels.iter().enumerate() {
        let closure = &topo.nodes[l].closure;
        let xi = reduced[l].vectors.column(j);
        for (p, &d) in closure.iter().enumerate() {
            matrix[(d, c)] = pou.values[l][p] * xi[p];
        }
    }
    TrialMatrix { m, matrix, labels }
}
