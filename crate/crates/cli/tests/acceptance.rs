//! Acceptance suite. Runs every criterion in sequence, prints one line each,
//! and exits non-zero when a gating criterion fails.
//!
//! The large-scale regression (criterion 5) is long-running and optional: it is
//! reported but does not gate. Set `MSPG_SKIP_LARGE_SCALE=1` to skip it.

use std::process::{Command, ExitCode};
use std::time::Instant;

use mspg_core::coupling::{error_report, normal_matrix, online_enrich, solve_coupled, Basis, OnlineOptions};
use mspg_core::harness::experiment::Offline;
use mspg_core::harness::{manufactured_order, ExperimentConfig, ReportRow};
use mspg_core::numerics::sparse::norm;
use mspg_core::test_space::Eigenproblem;
use mspg_core::Result;
use nalgebra::DVector;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn desk(example: u8) -> ExperimentConfig {
    ExperimentConfig {
        example,
        coarse: 8,
        fine: 64,
        ..Default::default()
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn full_snapshot_exactness() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trial: vec![1, 3],
        test: vec![7],
        eig: vec![Eigenproblem::One],
        ..desk(1)
    };
    let off = Offline::build(&cfg)?;
    let r = off.topo.ratio;
    let fnorm = norm(&off.op.load);
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [1, 3] {
        let cell = off.trial_cell(m)?;
        let ts = off.test_space(&cell, Eigenproblem::One, r - 1);
        let state = off.solve(&cell, &ts)?;
        let rep = off.report(&cell, &state);
        let gap = rel_gap(rep.err_ms_pct, rep.err_proj_pct);
        let atw = DVector::from_vec(off.op.stiffness.tr_mul_vec(&state.theta_w));
        let constraint = (cell.xi.matrix.transpose() * atw).norm() / fnorm;
        ok &= gap <= 1e-6 && constraint <= 1e-8;
        notes.push(format!(
            "m={m}: err {:.6}% vs proj {:.6}% (gap {gap:.1e}), constraint {constraint:.1e}",
            rep.err_ms_pct, rep.err_proj_pct
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 60.0;
    notes.push(format!("{secs:.1} s"));
    Ok(outcome(ok, notes.join("; ")))
}

fn fine_system_degeneracy() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = desk(1);
    let mesh = mspg_core::grid::FineMesh::new(cfg.fine)?;
    let field = mspg_core::harness::field_for_example(&cfg)?;
    let op = mspg_core::assembly::assemble(&mesh, &field)?;
    let u_h = mspg_core::assembly::solve_fine_reference(&op, mspg_core::assembly::DEFAULT_FINE_TOL)?;
    let n = mesh.num_dofs();
    let state = solve_coupled(&op, Basis::Identity(n), Basis::Identity(n))?;
    let diff: Vec<f64> = state.xi_u.iter().zip(&u_h).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(&u_h);
    let w = state.w.norm() / norm(&u_h);
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        rel <= 1e-8 && w <= 1e-8 && secs <= 30.0,
        format!("|u - u_h|/|u_h| {rel:.1e}, |w|/|u_h| {w:.1e}, {secs:.1} s"),
    ))
}

fn eigenproblem_two_bound() -> Result<Outcome> {
    let mut ok = true;
    let mut notes = Vec::new();
    for ex in [1, 3, 4] {
        let cfg = ExperimentConfig {
            trial: vec![1],
            eig: vec![Eigenproblem::Two],
            ..desk(ex)
        };
        let off = Offline::build(&cfg)?;
        let spectra = &off.spectra[&Eigenproblem::Two];
        let (lo, hi) = spectra
            .iter()
            .flat_map(|s| &s.values)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let monotone = spectra.iter().all(|s| {
            (1..s.values.len()).all(|l| s.lambda_min_excluded(l) <= s.lambda_min_excluded(l + 1))
        });
        ok &= lo >= -1e-10 && hi <= 1.0 + 1e-10 && monotone;
        notes.push(format!("example {ex}: [{lo:.2e}, {hi:.12}] monotone={monotone}"));
    }
    Ok(outcome(ok, notes.join("; ")))
}

/// Example 1 desk-scale sweep shared by the projection-trend and inf-sup criteria.
fn desk_sweep() -> Result<Vec<ReportRow>> {
    let cfg = ExperimentConfig {
        trial: vec![1, 3],
        test: vec![1, 3, 5, 7],
        eig: vec![Eigenproblem::One, Eigenproblem::Two],
        infsup: true,
        ..desk(1)
    };
    Offline::build(&cfg)?.run()
}

fn series(rows: &[ReportRow], m: usize, e: u8) -> Vec<&ReportRow> {
    rows.iter()
        .filter(|r| r.m_trial == m && r.eigenproblem == e && r.online_iter == 0)
        .collect()
}

fn projection_trend(rows: &[ReportRow]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for e in [1, 2] {
        for m in [1, 3] {
            let s = series(rows, m, e);
            let errs: Vec<f64> = s.iter().map(|r| r.err_ms_pct).collect();
            let monotone = errs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
            let last = s.last().expect("sweep rows");
            let gap = rel_gap(last.err_ms_pct, last.err_proj_pct);
            ok &= monotone && gap <= 1e-6 && s.len() == 4;
            let list: Vec<String> = errs.iter().map(|v| format!("{v:.4}")).collect();
            notes.push(format!("eig {e} m={m}: [{}] gap {gap:.1e}", list.join(", ")));
        }
    }
    outcome(ok, notes.join("; "))
}

fn infsup_monotone(rows: &[ReportRow]) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for e in [1, 2] {
        for m in [1, 3] {
            let vals: Vec<f64> = series(rows, m, e).iter().map(|r| r.infsup.unwrap_or(f64::NAN)).collect();
            let monotone = vals.windows(2).all(|w| w[1] >= w[0] - 1e-12);
            let last = vals.last().copied().unwrap_or(f64::NAN);
            ok &= monotone && last >= 0.99;
            let list: Vec<String> = vals.iter().map(|v| format!("{v:.4}")).collect();
            notes.push(format!("eig {e} m={m}: [{}]", list.join(", ")));
        }
    }
    outcome(ok, notes.join("; "))
}

fn large_scale() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        example: 1,
        coarse: 10,
        fine: 200,
        trial: vec![1],
        test: vec![7],
        eig: vec![Eigenproblem::One, Eigenproblem::Two],
        ..Default::default()
    };
    let off = Offline::build(&cfg)?;
    let cell = off.trial_cell(1)?;
    let ts = off.test_space(&cell, Eigenproblem::One, 7);
    let state = off.solve(&cell, &ts)?;
    let rep = off.report(&cell, &state);
    let err_ok = (rep.err_ms_pct - 2.85).abs() <= 1.0;
    let gap_ok = (rep.err_ms_pct - rep.err_proj_pct).abs() <= 0.3;
    let spectra = &off.spectra[&Eigenproblem::Two];
    let mut trend_ok = true;
    let mut lams = Vec::new();
    for (l, target) in [(1, 0.3445), (3, 0.7273), (5, 0.9542), (7, 0.9908)] {
        let lam = spectra
            .iter()
            .map(|s| s.lambda_min_excluded(l))
            .fold(f64::INFINITY, f64::min);
        trend_ok &= (lam - target).abs() <= 0.15;
        lams.push(format!("L={l}: {lam:.4} (target {target})"));
    }
    Ok(outcome(
        err_ok && gap_ok && trend_ok,
        format!(
            "err {:.4}% (target 2.85 +/- 1.0), proj {:.4}%, min excluded eigenvalues {}; {:.1} s",
            rep.err_ms_pct,
            rep.err_proj_pct,
            lams.join(", "),
            start.elapsed().as_secs_f64()
        ),
    ))
}

fn online_enrichment() -> Result<Outcome> {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for ex in [1, 4] {
        let cfg = ExperimentConfig {
            trial: vec![1],
            test: vec![1],
            eig: vec![Eigenproblem::One, Eigenproblem::Two],
            ..desk(ex)
        };
        let off = Offline::build(&cfg)?;
        let normal = normal_matrix(&off.op);
        let cell = off.trial_cell(1)?;
        for e in [Eigenproblem::One, Eigenproblem::Two] {
            let ts = off.test_space(&cell, e, 1);
            let mut state = off.solve(&cell, &ts)?;
            let mut residuals = vec![error_report(&state, &off.op, &off.u_h, &cell.projector).residual];
            for _ in 0..2 {
                let step = online_enrich(&mut state, &off.op, &off.topo, &cell.xi.matrix, &normal, &OnlineOptions::default())?;
                residuals.push(step.residual);
            }
            let rep = off.report(&cell, &state);
            let non_increasing = residuals.windows(2).all(|w| w[1] <= w[0]);
            let close = rep.err_ms_pct <= 1.05 * rep.err_proj_pct;
            ok &= non_increasing && close;
            let res: Vec<String> = residuals.iter().map(|v| format!("{v:.2e}")).collect();
            notes.push(format!(
                "example {ex} eig {e}: err {:.4}% vs 1.05 x proj {:.4}%, residuals [{}]",
                rep.err_ms_pct,
                1.05 * rep.err_proj_pct,
                res.join(", ")
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 120.0;
    notes.push(format!("{secs:.1} s"));
    Ok(outcome(ok, notes.join("; ")))
}

fn manufactured_convergence() -> Result<Outcome> {
    let p = manufactured_order(32, 64)?;
    Ok(outcome((p - 2.0).abs() <= 0.1, format!("observed order {p:.4} between n=32 and n=64")))
}

fn sweep_determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("sweep{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_mspg"))
            .args(["sweep", "--trial", "1,2", "--test", "1,3,7", "--eig", "1,2", "--online", "1", "--out"])
            .arg(&path)
            .status()?;
        if !status.success() {
            return Ok(outcome(false, format!("sweep exited with {status}")));
        }
        outputs.push(std::fs::read(&path)?);
    }
    let same = outputs[0] == outputs[1];
    Ok(outcome(
        same && !outputs[0].is_empty(),
        format!("{} bytes, identical={same}", outputs[0].len()),
    ))
}

fn main() -> ExitCode {
    let skip_large = std::env::var("MSPG_SKIP_LARGE_SCALE").is_ok_and(|v| !v.is_empty() && v != "0");
    let mut gating_failed = false;
    let mut report = |id: u32, name: &str, gating: bool, result: Result<Outcome>| {
        let (passed, detail) = match result {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let mark = if passed { "PASS" } else { "FAIL" };
        let tag = if gating { "" } else { " (optional)" };
        println!("[{mark}] {id} {name}{tag}: {detail}");
        if gating && !passed {
            gating_failed = true;
        }
    };

    report(1, "full-snapshot exactness", true, full_snapshot_exactness());
    report(2, "fine-system degeneracy", true, fine_system_degeneracy());
    report(3, "eigenproblem 2 spectral bound", true, eigenproblem_two_bound());
    let sweep = desk_sweep().map_err(|e| e.to_string());
    let from_sweep = |f: fn(&[ReportRow]) -> Outcome| match &sweep {
        Ok(rows) => Ok(f(rows)),
        Err(e) => Ok(outcome(false, format!("error: {e}"))),
    };
    report(4, "convergence to projection", true, from_sweep(projection_trend));
    if skip_large {
        println!("[SKIP] 5 large-scale regression (optional): MSPG_SKIP_LARGE_SCALE set");
    } else {
        report(5, "large-scale regression", false, large_scale());
    }
    report(6, "online enrichment", true, online_enrichment());
    report(7, "manufactured-solution convergence", true, manufactured_convergence());
    report(8, "inf-sup monotonicity", true, from_sweep(infsup_monotone));
    report(9, "sweep determinism", true, sweep_determinism());

    if gating_failed {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    } else {
        println!("acceptance: ok");
        ExitCode::SUCCESS
    }
}
