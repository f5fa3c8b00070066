//! Quick invariant suite behind the `validate` subcommand.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coupling::{global_residual, solve_coupled, Basis};
use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::Offline;
use crate::harness::mms::manufactured_order;
use crate::harness::report::to_csv;
use crate::numerics::sparse::norm;
use crate::test_space::Eigenproblem;
use crate::trial_space::partition_of_unity;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Run the invariant checks on a shrunken copy of `base` (same example and
/// coefficients, 4 x 4 coarse blocks of 8 x 8 fine cells).
pub fn run_validation(base: &ExperimentConfig) -> Result<Vec<Check>> {
    let r = 8;
    let cfg = ExperimentConfig {
        coarse: 4,
        fine: 4 * r,
        trial: vec![1],
        test: vec![1, 3, r - 1],
        eig: vec![Eigenproblem::One, Eigenproblem::Two],
        online: 0,
        infsup: false,
        raster: None,
        out: None,
        ..base.clone()
    };
    let mut off = Offline::build(&cfg)?;
    let mut checks = Vec::new();

    let pou = partition_of_unity(&off.topo, &off.op, cfg.pou)?;
    let mut sum = vec![0.0; off.topo.mesh.num_dofs()];
    for l in 0..off.topo.nodes.len() {
        for (s, v) in sum.iter_mut().zip(pou.to_global(&off.topo, l)) {
            *s += v;
        }
    }
    let dev = sum.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    checks.push(check("partition of unity sums to one", dev <= 1e-9, format!("max deviation {dev:.2e}")));

    let n = off.op.mesh.num_dofs();
    let full = solve_coupled(&off.op, Basis::Identity(n), Basis::Identity(n))?;
    let diff: Vec<f64> = full.xi_u.iter().zip(&off.u_h).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&off.u_h);
    let wn = full.w.norm() / norm(&off.u_h);
    checks.push(check(
        "identity spaces reproduce the fine solution",
        rel <= 1e-8 && wn <= 1e-8,
        format!("relative error {rel:.2e}, |w|/|u_h| {wn:.2e}"),
    ));

    let spec2 = off.spectra(Eigenproblem::Two)?;
    let (lo, hi) = spec2
        .iter()
        .flat_map(|s| &s.values)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    checks.push(check(
        "eigenproblem 2 spectrum inside [0, 1]",
        lo >= -1e-10 && hi <= 1.0 + 1e-10,
        format!("range [{lo:.3e}, {hi:.6}]"),
    ));

    let cell = off.trial_cell(1)?;
    let mut optimal = true;
    let mut exact_gap = 0.0f64;
    let mut sym = 0.0f64;
    let mut constraint = 0.0f64;
    for e in [Eigenproblem::One, Eigenproblem::Two] {
        for l in [1, 3, r - 1] {
            let ts = off.test_space(&cell, e, l);
            let state = off.solve(&cell, &ts)?;
            let rep = off.report(&cell, &state);
            optimal &= rep.err_ms_pct >= rep.err_proj_pct - 1e-8;
            let g = &state.blocks.as_ref().expect("reduced state").g_ww;
            sym = sym.max((g - g.transpose()).abs().max());
            if l == r - 1 {
                exact_gap = exact_gap.max((rep.err_ms_pct - rep.err_proj_pct).abs() / rep.err_proj_pct.max(1e-300));
                let atw = off.op.stiffness.tr_mul_vec(&state.theta_w);
                let xi = &cell.xi.matrix;
                let c = xi.tr_mul(&DMatrix::from_column_slice(n, 1, &atw));
                constraint = constraint.max(c.norm() / norm(&off.op.load));
            }
        }
    }
    checks.push(check("multiscale error never below projection error", optimal, String::new()));
    checks.push(check(
        "full edge spectrum gives the projection",
        exact_gap <= 1e-6 && constraint <= 1e-8,
        format!("relative gap {exact_gap:.2e}, constraint {constraint:.2e}"),
    ));
    checks.push(check("reduced system symmetric", sym <= 1e-10, format!("max asymmetry {sym:.2e}")));

    let state = off.solve(&cell, &off.test_space(&cell, Eigenproblem::One, r - 1))?;
    let res = global_residual(&state, &off.op);
    let theta = &state.blocks.as_ref().expect("reduced state").theta;
    let orth = (theta.transpose() * DVector::from_vec(res)).norm() / norm(&off.op.load);
    checks.push(check(
        "residual orthogonal to the test space",
        orth <= 1e-8,
        format!("relative |Theta^T r| {orth:.2e}"),
    ));
    let full_res = norm(&global_residual(&full, &off.op)) / norm(&off.op.load);
    checks.push(check(
        "identity spaces leave no residual",
        full_res <= 1e-8,
        format!("relative residual {full_res:.2e}"),
    ));

    let order = manufactured_order(16, 32)?;
    checks.push(check(
        "manufactured diffusion solution converges at second order",
        (order - 2.0).abs() <= 0.1,
        format!("observed order {order:.3}"),
    ));

    let first = to_csv(&off.run()?);
    let second = to_csv(&Offline::build(&cfg)?.run()?);
    checks.push(check("repeated runs are byte-identical", first == second, String::new()));
    Ok(checks)
}
