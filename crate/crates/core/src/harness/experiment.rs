//! Experiment driver: offline construction shared across sweep cells, then one
//! coupled solve per `(m, eigenproblem, L)` cell and optional online sweeps.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::assembly::{assemble, cell_peclet, FineSolver, SparseOperator, DEFAULT_FINE_TOL};
use crate::coupling::{
    error_report, infsup_estimate, normal_matrix, online_enrich, solve_coupled, Basis, ErrorReport,
    OnlineOptions, Projector, SaddleState,
};
use crate::error::Result;
use crate::grid::{CoarseTopology, FineMesh};
use crate::harness::config::ExperimentConfig;
use crate::harness::fields::{field_for_example, ExampleField};
use crate::harness::report::ReportRow;
use crate::test_space::{
    assemble_test_matrix, build_w1, EdgeSpectralResult, Eigenproblem, TestOffline, TestSnapshotW1, TestSpace,
    DEFAULT_TEST_DROPTOL,
};
use crate::trial_space::{TrialMatrix, TrialSpace};

/// Fine-grid Peclet level above which the fine discretization is flagged.
pub const PECLET_WARNING: f64 = 2.0;

/// Everything that does not depend on the `(m, L, eigenproblem)` cell.
pub struct Offline {
    pub config: ExperimentConfig,
    pub topo: CoarseTopology,
    pub field: ExampleField,
    pub op: SparseOperator,
    pub fine: FineSolver,
    pub u_h: Vec<f64>,
    pub peclet: f64,
    pub trial: TrialSpace,
    pub test: TestOffline,
    pub spectra: BTreeMap<Eigenproblem, Vec<EdgeSpectralResult>>,
}

/// Trial matrix with the bubbles and projector that depend on it.
pub struct TrialCell {
    pub xi: TrialMatrix,
    pub w1: Vec<TestSnapshotW1>,
    pub projector: Projector,
}

impl Offline {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let start = Instant::now();
        let mesh = FineMesh::new(config.fine)?;
        let topo = CoarseTopology::new(&mesh, config.coarse)?;
        let field = field_for_example(config)?;
        let peclet = cell_peclet(&mesh, &field);
        if peclet > PECLET_WARNING {
            log::warn!(
                "fine-grid cell Peclet number {peclet:.2} exceeds {PECLET_WARNING}; the reference solution may be under-resolved"
            );
        }
        let op = assemble(&mesh, &field)?;
        let fine = FineSolver::new(&op, DEFAULT_FINE_TOL)?;
        let u_h = fine.solve(&op.load)?;
        log::debug!("fine solve {:.2?}", start.elapsed());
        let m_max = config.trial.iter().copied().max().unwrap_or(1);
        let trial = TrialSpace::build(&topo, &op, m_max, config.pou)?;
        log::debug!("trial offline {:.2?}", start.elapsed());
        let test = TestOffline::build(&topo, &op)?;
        log::debug!("test offline {:.2?}", start.elapsed());
        let mut spectra = BTreeMap::new();
        for &e in &config.eig {
            if !spectra.contains_key(&e) {
                spectra.insert(e, test.spectra(&op, e)?);
            }
        }
        log::info!(
            "offline ready in {:.2?}: {} fine dofs, {} coarse blocks, {} interior edges",
            start.elapsed(),
            mesh.num_dofs(),
            topo.blocks.len(),
            topo.edges.len()
        );
        Ok(Self {
            config: config.clone(),
            topo,
            field,
            op,
            fine,
            u_h,
            peclet,
            trial,
            test,
            spectra,
        })
    }

    pub fn spectra(&mut self, e: Eigenproblem) -> Result<&[EdgeSpectralResult]> {
        if !self.spectra.contains_key(&e) {
            let s = self.test.spectra(&self.op, e)?;
            self.spectra.insert(e, s);
        }
        Ok(&self.spectra[&e])
    }

    pub fn trial_cell(&self, m: usize) -> Result<TrialCell> {
        let xi = self.trial.matrix(&self.topo, m);
        let w1 = build_w1(&self.topo, &self.op, &self.test.solvers, &xi, self.config.bubble)?;
        let projector = Projector::new(&self.op, Basis::Dense(&xi.matrix), self.config.projection)?;
        Ok(TrialCell { xi, w1, projector })
    }

    /// Test space with `l` eigenvectors per edge; `spectra` must already hold `e`.
    pub fn test_space(&self, cell: &TrialCell, e: Eigenproblem, l: usize) -> TestSpace {
        assemble_test_matrix(
            &self.topo,
            &cell.w1,
            &self.test.w2,
            &self.test.w3,
            &self.spectra[&e],
            l,
            DEFAULT_TEST_DROPTOL,
        )
    }

    pub fn solve(&self, cell: &TrialCell, ts: &TestSpace) -> Result<SaddleState> {
        solve_coupled(&self.op, Basis::Dense(&ts.theta), Basis::Dense(&cell.xi.matrix))
    }

    pub fn report(&self, cell: &TrialCell, state: &SaddleState) -> ErrorReport {
        error_report(state, &self.op, &self.u_h, &cell.projector)
    }

    /// All rows of the configured sweep, sorted by eigenproblem, `m`, `L`, iteration.
    pub fn run(&self) -> Result<Vec<ReportRow>> {
        let cfg = &self.config;
        let normal = (cfg.online > 0).then(|| normal_matrix(&self.op));
        let opts = OnlineOptions {
            residual_per_class: cfg.residual_per_class,
            ..Default::default()
        };
        let mut ms = cfg.trial.clone();
        ms.sort_unstable();
        ms.dedup();
        let mut ls = cfg.test.clone();
        ls.sort_unstable();
        ls.dedup();
        let mut rows = Vec::new();
        for &m in &ms {
            let t = Instant::now();
            let cell = self.trial_cell(m)?;
            log::debug!("m={m}: trial cell {:.2?}", t.elapsed());
            for &e in self.spectra.keys() {
                if !cfg.eig.contains(&e) {
                    continue;
                }
                for &l in &ls {
                    let t = Instant::now();
                    let ts = self.test_space(&cell, e, l);
                    log::debug!("m={m} L={l} eig={e}: test space {} columns {:.2?}", ts.theta.ncols(), t.elapsed());
                    let t = Instant::now();
                    let mut state = self.solve(&cell, &ts)?;
                    log::debug!("m={m} L={l} eig={e}: coupled solve {:.2?}", t.elapsed());
                    let lam = ts.report.min_lambda_excluded;
                    let min_lambda = lam.is_finite().then_some(lam);
                    let row = |state: &SaddleState, iter: usize| -> Result<ReportRow> {
                        let rep = self.report(&cell, state);
                        let infsup = if cfg.infsup {
                            let theta = &state.blocks.as_ref().expect("reduced state").theta;
                            Some(infsup_estimate(&self.op, &self.fine, theta, &cell.xi.matrix)?)
                        } else {
                            None
                        };
                        Ok(ReportRow {
                            example: cfg.example,
                            alpha: cfg.alpha(),
                            coarse_h: 1.0 / cfg.coarse as f64,
                            fine_h: 1.0 / cfg.fine as f64,
                            m_trial: m,
                            l_test: l,
                            eigenproblem: e.id(),
                            online_iter: iter,
                            err_ms_pct: rep.err_ms_pct,
                            err_proj_pct: rep.err_proj_pct,
                            w_norm: rep.w_norm,
                            min_lambda_excluded: min_lambda,
                            infsup,
                        })
                    };
                    rows.push(row(&state, 0)?);
                    if let Some(normal) = &normal {
                        for it in 1..=cfg.online {
                            let step = online_enrich(&mut state, &self.op, &self.topo, &cell.xi.matrix, normal, &opts)?;
                            log::info!(
                                "m={m} L={l} eig={e}: online iteration {it} added {} columns, residual {:.3e}",
                                step.added,
                                step.residual
                            );
                            rows.push(row(&state, it)?);
                        }
                    }
                }
            }
        }
        rows.sort_by(|a, b| {
            (a.eigenproblem, a.m_trial, a.l_test, a.online_iter).cmp(&(b.eigenproblem, b.m_trial, b.l_test, b.online_iter))
        });
        Ok(rows)
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    Offline::build(config)?.run()
}
