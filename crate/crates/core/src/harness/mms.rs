//! Manufactured-solution check of the fine discretization: `-Δu = 2π² u*`
//! with `u* = sin(πx) sin(πy)`.

use std::f64::consts::PI;

use crate::assembly::{assemble, FieldFn, FineSolver, DEFAULT_FINE_TOL};
use crate::error::Result;
use crate::grid::FineMesh;
use crate::numerics::sparse::dot;

pub fn manufactured_solution(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// Mass-weighted norm of the nodal error `u_h - I_h u*` on an `n x n` mesh.
pub fn manufactured_error(n: usize) -> Result<f64> {
    let mesh = FineMesh::new(n)?;
    let field = FieldFn {
        kappa: |_, _| 1.0,
        velocity: |_, _| [0.0, 0.0],
        source: |x, y| 2.0 * PI * PI * manufactured_solution(x, y),
    };
    let op = assemble(&mesh, &field)?;
    let u_h = FineSolver::new(&op, DEFAULT_FINE_TOL)?.solve(&op.load)?;
    let e: Vec<f64> = u_h
        .iter()
        .enumerate()
        .map(|(d, u)| {
            let (x, y) = mesh.dof_point(d);
            u - manufactured_solution(x, y)
        })
        .collect();
    Ok(dot(&e, &op.mass.mul_vec(&e)).sqrt())
}

/// Observed order between meshes `coarse` and `fine`.
pub fn manufactured_order(coarse: usize, fine: usize) -> Result<f64> {
    let ec = manufactured_error(coarse)?;
    let ef = manufactured_error(fine)?;
    Ok((ec / ef).ln() / (fine as f64 / coarse as f64).ln())
}
