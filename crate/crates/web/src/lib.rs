//! Browser bindings: fine reference field, one multiscale solve, and the edge
//! eigenvalue spectrum. Fields are returned on the full `(n+1) x (n+1)` lattice,
//! row-major from `y = 0`, boundary zeros included.

use mspg_core::harness::experiment::Offline;
use mspg_core::harness::ExperimentConfig;
use mspg_core::test_space::Eigenproblem;
use wasm_bindgen::prelude::*;

/// Plain-type core of the bindings, usable natively.
pub mod inner {
    use super::*;
    use mspg_core::assembly::{assemble, FineSolver, DEFAULT_FINE_TOL};
    use mspg_core::grid::FineMesh;
    use mspg_core::harness::field_for_example;
    use mspg_core::Result;

    pub fn config(example: u8, alpha: f64, coarse: usize, fine: usize) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig {
            example,
            coarse,
            fine,
            ..Default::default()
        };
        if alpha > 0.0 {
            cfg.alpha = Some(alpha);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    #[derive(Debug, Clone)]
    pub struct Solution {
        pub n: usize,
        pub fine: Vec<f64>,
        pub multiscale: Vec<f64>,
        pub err_ms_pct: f64,
        pub err_proj_pct: f64,
        pub test_columns: usize,
        pub trial_columns: usize,
    }

    pub fn fine_solution(example: u8, alpha: f64, coarse: usize, fine: usize) -> Result<Vec<f64>> {
        let cfg = config(example, alpha, coarse, fine)?;
        let mesh = FineMesh::new(cfg.fine)?;
        let op = assemble(&mesh, &field_for_example(&cfg)?)?;
        let u_h = FineSolver::new(&op, DEFAULT_FINE_TOL)?.solve(&op.load)?;
        Ok(mesh.to_lattice(&u_h))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn multiscale_solve(
        example: u8,
        alpha: f64,
        coarse: usize,
        fine: usize,
        m: usize,
        l: usize,
        eig: u8,
    ) -> Result<Solution> {
        let mut cfg = config(example, alpha, coarse, fine)?;
        let e = Eigenproblem::try_from(eig)?;
        cfg.trial = vec![m];
        cfg.test = vec![l];
        cfg.eig = vec![e];
        cfg.validate()?;
        let off = Offline::build(&cfg)?;
        let cell = off.trial_cell(m)?;
        let ts = off.test_space(&cell, e, l);
        let state = off.solve(&cell, &ts)?;
        let rep = off.report(&cell, &state);
        let mesh = &off.topo.mesh;
        Ok(Solution {
            n: mesh.n(),
            fine: mesh.to_lattice(&off.u_h),
            multiscale: mesh.to_lattice(&state.xi_u),
            err_ms_pct: rep.err_ms_pct,
            err_proj_pct: rep.err_proj_pct,
            test_columns: ts.theta.ncols(),
            trial_columns: cell.xi.matrix.ncols(),
        })
    }

    /// Per-edge eigenvalues, `edges x (ratio - 1)`, edge-major.
    #[derive(Debug, Clone)]
    pub struct Spectrum {
        pub edges: usize,
        pub per_edge: usize,
        pub values: Vec<f64>,
    }

    impl Spectrum {
        /// Smallest eigenvalue left out when `l` vectors are kept on every edge.
        pub fn min_excluded(&self, l: usize) -> f64 {
            if l >= self.per_edge {
                return f64::INFINITY;
            }
            (0..self.edges)
                .map(|k| self.values[k * self.per_edge + l])
                .fold(f64::INFINITY, f64::min)
        }
    }

    pub fn edge_spectrum(example: u8, alpha: f64, coarse: usize, fine: usize, eig: u8) -> Result<Spectrum> {
        let mut cfg = config(example, alpha, coarse, fine)?;
        let e = Eigenproblem::try_from(eig)?;
        cfg.eig = vec![e];
        let off = Offline::build(&cfg)?;
        let spectra = &off.spectra[&e];
        let per_edge = spectra.first().map_or(0, |s| s.values.len());
        let values = spectra.iter().flat_map(|s| s.values.iter().copied()).collect();
        Ok(Spectrum {
            edges: spectra.len(),
            per_edge,
            values,
        })
    }
}

fn js_err(e: mspg_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Fine reference solution on the lattice.
#[wasm_bindgen(js_name = fineSolution)]
pub fn fine_solution(example: u8, alpha: f64, coarse: usize, fine: usize) -> Result<Vec<f64>, JsError> {
    inner::fine_solution(example, alpha, coarse, fine).map_err(js_err)
}

#[wasm_bindgen]
pub struct Solution(inner::Solution);

#[wasm_bindgen]
impl Solution {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.0.n
    }
    #[wasm_bindgen(getter)]
    pub fn fine(&self) -> Vec<f64> {
        self.0.fine.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn multiscale(&self) -> Vec<f64> {
        self.0.multiscale.clone()
    }
    #[wasm_bindgen(getter, js_name = errMs)]
    pub fn err_ms(&self) -> f64 {
        self.0.err_ms_pct
    }
    #[wasm_bindgen(getter, js_name = errProj)]
    pub fn err_proj(&self) -> f64 {
        self.0.err_proj_pct
    }
    #[wasm_bindgen(getter, js_name = testColumns)]
    pub fn test_columns(&self) -> usize {
        self.0.test_columns
    }
    #[wasm_bindgen(getter, js_name = trialColumns)]
    pub fn trial_columns(&self) -> usize {
        self.0.trial_columns
    }
}

/// Multiscale solve with `m` trial and `l` test vectors per neighborhood / edge.
#[wasm_bindgen(js_name = multiscaleSolve)]
#[allow(clippy::too_many_arguments)]
pub fn multiscale_solve(
    example: u8,
    alpha: f64,
    coarse: usize,
    fine: usize,
    m: usize,
    l: usize,
    eig: u8,
) -> Result<Solution, JsError> {
    inner::multiscale_solve(example, alpha, coarse, fine, m, l, eig)
        .map(Solution)
        .map_err(js_err)
}

#[wasm_bindgen]
pub struct Spectrum(inner::Spectrum);

#[wasm_bindgen]
impl Spectrum {
    #[wasm_bindgen(getter)]
    pub fn edges(&self) -> usize {
        self.0.edges
    }
    #[wasm_bindgen(getter, js_name = perEdge)]
    pub fn per_edge(&self) -> usize {
        self.0.per_edge
    }
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }
    /// `min_excluded(l)`; `Infinity` when every vector is kept.
    #[wasm_bindgen(js_name = minExcluded)]
    pub fn min_excluded(&self, l: usize) -> f64 {
        self.0.min_excluded(l)
    }
}

#[wasm_bindgen(js_name = edgeSpectrum)]
pub fn edge_spectrum(example: u8, alpha: f64, coarse: usize, fine: usize, eig: u8) -> Result<Spectrum, JsError> {
    inner::edge_spectrum(example, alpha, coarse, fine, eig)
        .map(Spectrum)
        .map_err(js_err)
}
