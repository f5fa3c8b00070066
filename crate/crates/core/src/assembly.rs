//! Bilinear (Q1) assembly of the convection-diffusion operator
//! `-div(kappa grad u) + b . grad u` on the structured fine mesh.

use crate::error::{Error, Result};
use crate::grid::FineMesh;
use crate::numerics::{sparse, BandedLu, CsrMatrix};

/// Diffusion, velocity and source of the transport problem.
pub trait CoefficientField: Send + Sync {
    fn kappa(&self, x: f64, y: f64) -> f64;
    fn velocity(&self, x: f64, y: f64) -> [f64; 2];
    fn source(&self, x: f64, y: f64) -> f64;
}

/// Coefficient field built from closures.
pub struct FieldFn<K, B, F> {
    pub kappa: K,
    pub velocity: B,
    pub source: F,
}

impl<K, B, F> CoefficientField for FieldFn<K, B, F>
where
    K: Fn(f64, f64) -> f64 + Send + Sync,
    B: Fn(f64, f64) -> [f64; 2] + Send + Sync,
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn kappa(&self, x: f64, y: f64) -> f64 {
        (self.kappa)(x, y)
    }
    fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        (self.velocity)(x, y)
    }
    fn source(&self, x: f64, y: f64) -> f64 {
        (self.source)(x, y)
    }
}

/// Operator over every lattice node, boundary included.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub load: Vec<f64>,
}

/// Fine-scale operator on the interior DOFs (Dirichlet nodes eliminated).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub mesh: FineMesh,
    /// `(A)_ij = a(phi_j, phi_i)`.
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub load: Vec<f64>,
    /// Stiffness before Dirichlet elimination, indexed by lattice node.
    pub lattice_stiffness: CsrMatrix,
}

const GAUSS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9, // 1/(2 sqrt 3)
    0.5 + 0.288_675_134_594_812_9,
];

/// Q1 shape functions on the unit reference square, nodes counter-clockwise
/// from the lower-left corner.
pub(crate) fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ]
}

/// Reference gradients `(d/dxi, d/deta)`.
pub(crate) fn shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

pub(crate) fn element_nodes(mesh: &FineMesh, ei: usize, ej: usize) -> [usize; 4] {
    [
        mesh.lattice_index(ei, ej),
        mesh.lattice_index(ei + 1, ej),
        mesh.lattice_index(ei + 1, ej + 1),
        mesh.lattice_index(ei, ej + 1),
    ]
}

/// Assemble stiffness, mass and load over the full lattice with 2x2 Gauss quadrature.
pub fn assemble_lattice(mesh: &FineMesh, field: &dyn CoefficientField) -> Result<LatticeOperator> {
    let n = mesh.n();
    let h = mesh.h();
    let nn = mesh.num_lattice_nodes();
    let mut kt = Vec::with_capacity(16 * n * n);
    let mut mt = Vec::with_capacity(16 * n * n);
    let mut load = vec![0.0; nn];
    for ej in 0..n {
        for ei in 0..n {
            let nodes = element_nodes(mesh, ei, ej);
            let mut ke = [[0.0; 4]; 4];
            let mut me = [[0.0; 4]; 4];
            let mut fe = [0.0; 4];
            for &gx in &GAUSS {
                for &gy in &GAUSS {
                    let w = 0.25;
                    let x = (ei as f64 + gx) * h;
                    let y = (ej as f64 + gy) * h;
                    let kappa = field.kappa(x, y);
                    if !(kappa > 0.0) {
                        return Err(Error::InvalidCoefficient(format!(
                            "diffusion {kappa} at ({x:.6}, {y:.6}) is not positive"
                        )));
                    }
                    let b = field.velocity(x, y);
                    let f = field.source(x, y);
                    let phi = shape(gx, gy);
                    let dphi = shape_grad(gx, gy);
                    for a in 0..4 {
                        for c in 0..4 {
                            let diff = dphi[c][0] * dphi[a][0] + dphi[c][1] * dphi[a][1];
                            let conv = (b[0] * dphi[c][0] + b[1] * dphi[c][1]) * phi[a];
                            ke[a][c] += w * (kappa * diff + h * conv);
                            me[a][c] += w * h * h * phi[a] * phi[c];
                        }
                        fe[a] += w * h * h * f * phi[a];
                    }
                }
            }
            for a in 0..4 {
                for c in 0..4 {
                    kt.push((nodes[a], nodes[c], ke[a][c]));
                    mt.push((nodes[a], nodes[c], me[a][c]));
                }
                load[nodes[a]] += fe[a];
            }
        }
    }
    Ok(LatticeOperator {
        stiffness: CsrMatrix::from_triplets(nn, nn, &kt),
        mass: CsrMatrix::from_triplets(nn, nn, &mt),
        load,
    })
}

/// Assemble the fine operator with homogeneous Dirichlet nodes eliminated.
pub fn assemble(mesh: &FineMesh, field: &dyn CoefficientField) -> Result<SparseOperator> {
    let lattice = assemble_lattice(mesh, field)?;
    let interior: Vec<usize> = (0..mesh.num_dofs())
        .map(|d| {
            let (i, j) = mesh.dof_coords(d);
            mesh.lattice_index(i, j)
        })
        .collect();
    Ok(SparseOperator {
        mesh: mesh.clone(),
        stiffness: lattice.stiffness.submatrix(&interior, &interior)?,
        mass: lattice.mass.submatrix(&interior, &interior)?,
        load: interior.iter().map(|&k| lattice.load[k]).collect(),
        lattice_stiffness: lattice.stiffness,
    })
}

/// Entrywise extraction of a block of an assembled matrix.
pub fn local_submatrix(matrix: &CsrMatrix, rows: &[usize], cols: &[usize]) -> Result<CsrMatrix> {
    matrix.submatrix(rows, cols)
}

pub const DEFAULT_FINE_TOL: f64 = 1e-10;

/// Factored fine stiffness, usable for both `A` and `A^T` solves.
#[derive(Debug, Clone)]
pub struct FineSolver {
    matrix: CsrMatrix,
    lu: BandedLu,
    tol: f64,
}

impl FineSolver {
    pub fn new(op: &SparseOperator, tol: f64) -> Result<Self> {
        let lu = BandedLu::factor(&op.stiffness).map_err(|_| Error::SolverFailure {
            residual: f64::INFINITY,
            target: tol,
        })?;
        Ok(Self {
            matrix: op.stiffness.clone(),
            lu,
            tol,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(rhs, false)
    }

    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let bnorm = sparse::norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let apply = |x: &[f64]| {
            if transpose {
                self.matrix.tr_mul_vec(x)
            } else {
                self.matrix.mul_vec(x)
            }
        };
        let inv = |r: &[f64]| {
            if transpose {
                self.lu.solve_transpose(r)
            } else {
                self.lu.solve(r)
            }
        };
        let mut x = inv(rhs);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let ax = apply(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = sparse::norm(&r) / bnorm;
            if rel <= self.tol {
                return Ok(x);
            }
            let dx = inv(&r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        Err(Error::SolverFailure {
            residual: rel,
            target: self.tol,
        })
    }
}

/// Fine reference solution of `A u = f` with relative residual at most `tol`.
pub fn solve_fine_reference(op: &SparseOperator, tol: f64) -> Result<Vec<f64>> {
    FineSolver::new(op, tol)?.solve(&op.load)
}

/// Cell Peclet number `max |b| h / (2 kappa)` sampled at element quadrature points.
pub fn cell_peclet(mesh: &FineMesh, field: &dyn CoefficientField) -> f64 {
    let h = mesh.h();
    let mut worst = 0.0f64;
    for ej in 0..mesh.n() {
        for ei in 0..mesh.n() {
            for &gx in &GAUSS {
                for &gy in &GAUSS {
                    let x = (ei as f64 + gx) * h;
                    let y = (ej as f64 + gy) * h;
                    let b = field.velocity(x, y);
                    let speed = (b[0] * b[0] + b[1] * b[1]).sqrt();
                    worst = worst.max(speed * h / (2.0 * field.kappa(x, y)));
                }
            }
        }
    }
    worst
}
