//! Shared numerical kernels: dense generalized symmetric eigenproblems, local
//! sparse solves, column orthonormalization and constrained energy minimization.

pub mod banded;
pub mod sparse;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
pub use banded::BandedLu;
pub use sparse::CsrMatrix;

/// Eigenpairs of `S v = λ T v`, ascending, with `T`-orthonormal vectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Solve the dense generalized problem `S v = λ T v` with `S` symmetric and `T` SPD.
pub fn generalized_sym_eig(s: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<EigenPairs> {
    let n = s.nrows();
    assert!(s.is_square() && t.shape() == (n, n), "eigenproblem shape mismatch");
    let s = symmetrized(s);
    let t = symmetrized(t);
    let chol = t.cholesky().ok_or_else(|| Error::SingularMetric {
        context: format!("{n}x{n} generalized eigenproblem"),
    })?;
    let l = chol.l();
    // C = L^{-1} S L^{-T}
    let ls = l
        .solve_lower_triangular(&s)
        .expect("cholesky factor has nonzero diagonal");
    let c = l
        .solve_lower_triangular(&ls.transpose())
        .expect("cholesky factor has nonzero diagonal");
    let c = symmetrized(&c);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let q = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let vectors = l
        .tr_solve_lower_triangular(&q)
        .expect("cholesky factor has nonzero diagonal");
    Ok(EigenPairs { values, vectors })
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let drift = (m - m.transpose()).abs().max();
    if drift == 0.0 {
        m.clone()
    } else {
        if drift > 1e-12 * m.abs().max().max(1.0) {
            log::debug!("symmetrizing matrix with asymmetry {drift:e}");
        }
        (m + m.transpose()) * 0.5
    }
}

/// Factor once, solve many right-hand sides on a local region.
#[derive(Debug, Clone)]
pub struct LocalSolver {
    matrix: CsrMatrix,
    lu: BandedLu,
    region: String,
}

const LOCAL_RESIDUAL_TOL: f64 = 1e-10;

impl LocalSolver {
    pub fn new(matrix: CsrMatrix, region: impl Into<String>) -> Result<Self> {
        let region = region.into();
        let lu = BandedLu::factor(&matrix).map_err(|p| Error::LocalSolver {
            region: region.clone(),
            reason: format!("singular pivot at local row {}", p.row),
        })?;
        Ok(Self { matrix, lu, region })
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.lu.solve(rhs);
        self.refine(rhs, &mut x, false)?;
        Ok(x)
    }

    /// Solve with the transposed matrix.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.lu.solve_transpose(rhs);
        self.refine(rhs, &mut x, true)?;
        Ok(x)
    }

    fn apply(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        if transpose {
            self.matrix.tr_mul_vec(x)
        } else {
            self.matrix.mul_vec(x)
        }
    }

    fn refine(&self, rhs: &[f64], x: &mut [f64], transpose: bool) -> Result<()> {
        let bnorm = sparse::norm(rhs);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let mut rel = f64::INFINITY;
        for _ in 0..3 {
            let ax = self.apply(x, transpose);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = sparse::norm(&r) / bnorm;
            if rel <= LOCAL_RESIDUAL_TOL {
                return Ok(());
            }
            let dx = if transpose {
                self.lu.solve_transpose(&r)
            } else {
                self.lu.solve(&r)
            };
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        Err(Error::LocalSolver {
            region: self.region.clone(),
            reason: format!("relative residual {rel:e} above {LOCAL_RESIDUAL_TOL:e}"),
        })
    }
}

/// One-shot local Dirichlet solve.
pub fn local_dirichlet_solve(a_local: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    LocalSolver::new(a_local.clone(), "local region")?.solve(rhs)
}

/// Orthonormalize columns in the Euclidean inner product.
///
/// A column is dropped when its residual after projection has norm at most
/// `droptol` times its original norm.
/// `aᵀ b` through the blocked product; `tr_mul` falls back to per-entry dot products.
pub fn at_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

pub fn orthonormalize_columns(v: &DMatrix<f64>, droptol: f64) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(v.nrows(), 0);
    extend_orthonormal(&mut q, v, droptol);
    q
}

const GS_BLOCK: usize = 32;

/// Append the columns of `new` to the orthonormal set `q`, orthogonalized
/// against it. Returns the number of columns kept.
pub fn extend_orthonormal(q: &mut DMatrix<f64>, new: &DMatrix<f64>, droptol: f64) -> usize {
    let nrows = q.nrows();
    assert_eq!(new.nrows(), nrows);
    let start = q.ncols();
    let mut out = std::mem::replace(q, DMatrix::zeros(0, 0)).resize_horizontally(start + new.ncols(), 0.0);
    let mut k = start;
    let mut c0 = 0;
    while c0 < new.ncols() {
        let bs = GS_BLOCK.min(new.ncols() - c0);
        let mut x = new.columns(c0, bs).into_owned();
        let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
        if k > 0 {
            // two passes of block classical Gram-Schmidt
            for _ in 0..2 {
                let basis = out.columns(0, k);
                let coeffs = (x.transpose() * basis).transpose();
                x -= basis * coeffs;
            }
        }
        let block_start = k;
        for c in 0..bs {
            if norms[c] == 0.0 {
                continue;
            }
            let mut col = x.column(c).into_owned();
            for _ in 0..2 {
                for p in block_start..k {
                    let qp = out.column(p);
                    let d = qp.dot(&col);
                    col.axpy(-d, &qp, 1.0);
                }
            }
            let nrm = col.norm();
            if nrm <= droptol * norms[c] {
                continue;
            }
            out.column_mut(k).copy_from(&(col / nrm));
            k += 1;
        }
        c0 += bs;
    }
    *q = out.resize_horizontally(k, 0.0);
    k - start
}

/// Minimum-energy extension: minimize `vᵀ B v` over vectors with
/// `v[constrained] = trace`. `B` must be positive definite on the free DOFs.
pub fn min_energy_extension(
    b_local: &CsrMatrix,
    constrained: &[usize],
    trace: &[f64],
) -> Result<DVector<f64>> {
    let ext = MinEnergyExtension::new(b_local, constrained)?;
    ext.extend(trace)
}

/// Factored form of [`min_energy_extension`] for repeated traces.
#[derive(Debug, Clone)]
pub struct MinEnergyExtension {
    dim: usize,
    constrained: Vec<usize>,
    free: Vec<usize>,
    coupling: CsrMatrix,
    solver: Option<LocalSolver>,
}

impl MinEnergyExtension {
    pub fn new(b_local: &CsrMatrix, constrained: &[usize]) -> Result<Self> {
        let dim = b_local.nrows();
        let mut is_constrained = vec![false; dim];
        for &c in constrained {
            if c >= dim {
                return Err(Error::Index { index: c, dim });
            }
            is_constrained[c] = true;
        }
        let free: Vec<usize> = (0..dim).filter(|&k| !is_constrained[k]).collect();
        let coupling = b_local.submatrix(&free, constrained)?;
        let solver = if free.is_empty() {
            None
        } else {
            let bff = b_local.submatrix(&free, &free)?;
            Some(match LocalSolver::new(bff.clone(), "energy minimization") {
                Ok(s) => s,
                Err(_) => {
                    let diag = bff.diagonal();
                    let ridge = 1e-12 * diag.iter().sum::<f64>() / diag.len() as f64;
                    log::warn!("energy matrix singular on free DOFs, adding ridge {ridge:e}");
                    LocalSolver::new(bff.add_diagonal(ridge), "energy minimization").map_err(
                        |_| Error::Regularization {
                            context: format!("{}-DOF energy minimization", free.len()),
                        },
                    )?
                }
            })
        };
        Ok(Self {
            dim,
            constrained: constrained.to_vec(),
            free,
            coupling,
            solver,
        })
    }

    pub fn extend(&self, trace: &[f64]) -> Result<DVector<f64>> {
        assert_eq!(trace.len(), self.constrained.len());
        let mut v = DVector::zeros(self.dim);
        for (&c, &t) in self.constrained.iter().zip(trace) {
            v[c] = t;
        }
        if let Some(solver) = &self.solver {
            let rhs: Vec<f64> = self.coupling.mul_vec(trace).iter().map(|x| -x).collect();
            let vf = solver.solve(&rhs)?;
            for (&f, x) in self.free.iter().zip(vf) {
                v[f] = x;
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * 0.5
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    fn det(mut m: DMatrix<f64>) -> f64 {
        let n = m.nrows();
        let mut d = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&a, &b| m[(a, k)].abs().total_cmp(&m[(b, k)].abs()))
                .unwrap();
            if m[(p, k)] == 0.0 {
                return 0.0;
            }
            if p != k {
                m.swap_rows(p, k);
                d = -d;
            }
            d *= m[(k, k)];
            for i in k + 1..n {
                let l = m[(i, k)] / m[(k, k)];
                for j in k..n {
                    let v = m[(k, j)];
                    m[(i, j)] -= l * v;
                }
            }
        }
        d
    }

    /// Roots of det(S - λT) located by a sign scan and bisection.
    fn char_poly_roots(s: &DMatrix<f64>, t: &DMatrix<f64>, lo: f64, hi: f64) -> Vec<f64> {
        let f = |x: f64| det(s - t * x);
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = lo;
        let mut f0 = f(x0);
        for k in 1..=steps {
            let x1 = lo + (hi - lo) * k as f64 / steps as f64;
            let f1 = f(x1);
            if f0 == 0.0 || f0.signum() != f1.signum() {
                let (mut a, mut b, mut fa) = (x0, x1, f0);
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    let fm = f(mid);
                    if fa.signum() == fm.signum() {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn identity_pencil() {
        let id = DMatrix::<f64>::identity(4, 4);
        let e = generalized_sym_eig(&id, &id).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_pencil_sorted() {
        let s = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, 1.0, 2.0]));
        let e = generalized_sym_eig(&s, &DMatrix::identity(3, 3)).unwrap();
        for (v, expect) in e.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn random_pencil_against_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s0 = random_spd(8, &mut rng);
        let t = random_spd(8, &mut rng);
        // make S indefinite so negative eigenvalues are covered too
        let s = s0 - DMatrix::identity(8, 8) * 2.0;
        let e = generalized_sym_eig(&s, &t).unwrap();
        for k in 0..8 {
            let v = e.vectors.column(k);
            let r = &s * v - &t * v * e.values[k];
            assert!(r.norm() <= 1e-9, "pair {k} residual {}", r.norm());
            let rq = v.dot(&(&s * v)) / v.dot(&(&t * v));
            assert!((rq - e.values[k]).abs() <= 1e-9);
        }
        let vtv = e.vectors.transpose() * &t * &e.vectors;
        assert!((vtv - DMatrix::identity(8, 8)).abs().max() < 1e-10);
        let lo = e.values[0] - 1.0;
        let hi = e.values[7] + 1.0;
        let roots = char_poly_roots(&s, &t, lo, hi);
        assert_eq!(roots.len(), 8, "oracle roots {roots:?}");
        for (r, v) in roots.iter().zip(&e.values) {
            assert!((r - v).abs() < 1e-7 * (1.0 + v.abs()), "{r} vs {v}");
        }
    }

    #[test]
    fn singular_metric_rejected() {
        let s = DMatrix::<f64>::identity(2, 2);
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            generalized_sym_eig(&s, &t),
            Err(Error::SingularMetric { .. })
        ));
    }

    #[test]
    fn local_solve_identity_and_zero() {
        let id = CsrMatrix::identity(5);
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(local_dirichlet_solve(&id, &b).unwrap(), b.to_vec());
        assert_eq!(local_dirichlet_solve(&id, &[0.0; 5]).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn tridiagonal_inverse_column() {
        // inverse of tridiag(-1, 2, -1) of size n: (A^{-1})_{i1} = (n - i + 1)/(n + 1), 1-based
        let n = 9;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let x = local_dirichlet_solve(&a, &e1).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let expect = (n - i) as f64 / (n + 1) as f64;
            assert!((xi - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_local_matrix_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            local_dirichlet_solve(&a, &[1.0, 1.0]),
            Err(Error::LocalSolver { .. })
        ));
    }

    #[test]
    fn orthonormalize_duplicates_and_rank() {
        let v = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(orthonormalize_columns(&v, 1e-10).ncols(), 1);

        let id = DMatrix::<f64>::identity(4, 3);
        let q = orthonormalize_columns(&id, 1e-10);
        assert!((q.abs() - id).abs().max() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
        let rank = w.clone().svd(false, false).rank(1e-10);
        let q = orthonormalize_columns(&w, 1e-10);
        assert_eq!(q.ncols(), rank);
        assert_eq!(q.ncols(), 3);
    }

    #[test]
    fn orthonormalize_many_columns_across_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = DMatrix::from_fn(200, 50, |_, _| rng.random_range(-1.0..1.0));
        // append dependent combinations
        let mix = DMatrix::from_fn(50, 30, |_, _| rng.random_range(-1.0..1.0));
        let dependent = &base * mix;
        let mut all = DMatrix::zeros(200, 80);
        all.columns_mut(0, 50).copy_from(&base);
        all.columns_mut(50, 30).copy_from(&dependent);
        let q = orthonormalize_columns(&all, 1e-10);
        assert_eq!(q.ncols(), 50);
        let g = q.transpose() * &q;
        assert!((g - DMatrix::identity(50, 50)).abs().max() < 1e-10);
    }

    #[test]
    fn min_energy_zero_trace_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = CsrMatrix::from_dense(&random_spd(6, &mut rng));
        let v = min_energy_extension(&b, &[1, 4], &[0.0, 0.0]).unwrap();
        assert!(v.norm() == 0.0);

        let id = CsrMatrix::identity(6);
        let v = min_energy_extension(&id, &[1, 4], &[2.0, -1.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 2.0, 0.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn min_energy_beats_random_admissible_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bd = random_spd(10, &mut rng);
        let b = CsrMatrix::from_dense(&bd);
        let constrained = [0, 3, 7];
        let trace = [1.0, -0.5, 2.0];
        let v = min_energy_extension(&b, &constrained, &trace).unwrap();
        let energy = v.dot(&(&bd * &v));
        for _ in 0..500 {
            let mut cand = DVector::from_fn(10, |_, _| rng.random_range(-3.0..3.0));
            for (&c, &t) in constrained.iter().zip(&trace) {
                cand[c] = t;
            }
            assert!(cand.dot(&(&bd * &cand)) >= energy - 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn min_energy_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bd = random_spd(8, &mut rng);
            let bm = CsrMatrix::from_dense(&bd);
            let c = [2, 5];
            let t1 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let t2 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let ext = MinEnergyExtension::new(&bm, &c).unwrap();
            let combo = [a * t1[0] + b * t2[0], a * t1[1] + b * t2[1]];
            let lhs = ext.extend(&combo).unwrap();
            let rhs = ext.extend(&t1).unwrap() * a + ext.extend(&t2).unwrap() * b;
            proptest::prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + a.abs() + b.abs()));
        }

        #[test]
        fn orthonormalized_columns_are_orthonormal(seed in 0u64..1000, ncols in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = DMatrix::from_fn(15, ncols, |_, _| rng.random_range(-1.0..1.0));
            let q = orthonormalize_columns(&v, 1e-10);
            let g = q.transpose() * &q;
            proptest::prop_assert!((g - DMatrix::identity(q.ncols(), q.ncols())).abs().max() <= 1e-10);
            // span preserved: residual of V after projection onto Q is tiny
            let resid = &v - &q * (q.transpose() * &v);
            proptest::prop_assert!(resid.abs().max() <= 1e-9);
        }
    }
}
