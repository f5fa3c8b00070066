//! Permeability rasters and the Darcy pressure pre-solve that supplies the
//! Example 5 velocity.

use std::path::Path;

use crate::assembly::{assemble_lattice, shape_grad, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::FineMesh;
use crate::numerics::LocalSolver;

/// Cell-centered scalar field, row-major with row 0 at `y = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityRaster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl PermeabilityRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Config(format!(
                "raster {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidCoefficient(format!("permeability {v} is not positive")));
        }
        Ok(Self { width, height, values })
    }

    /// Header `width height`, then `width * height` whitespace-separated values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "empty raster file".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: hl + 1,
                reason: format!("bad header '{header}'"),
            })?;
        let [width, height] = dims[..] else {
            return Err(Error::Parse {
                line: hl + 1,
                reason: "header must be 'width height'".into(),
            });
        };
        let mut values = Vec::with_capacity(width * height);
        let mut last_line = hl + 1;
        for (k, line) in lines {
            last_line = k + 1;
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: k + 1,
                    reason: format!("bad value '{tok}'"),
                })?;
                values.push(v);
            }
        }
        if values.len() != width * height {
            return Err(Error::Parse {
                line: last_line,
                reason: format!("expected {} values, found {}", width * height, values.len()),
            });
        }
        Self::new(width, height, values)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.width, self.height);
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s += &line.join(" ");
            s.push('\n');
        }
        s
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Value of the cell containing `(x, y)` in the unit square.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let c = ((x * self.width as f64) as usize).min(self.width - 1);
        let r = ((y * self.height as f64) as usize).min(self.height - 1);
        self.at(c, r)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn load_permeability_raster(path: &Path) -> Result<PermeabilityRaster> {
    PermeabilityRaster::parse(&std::fs::read_to_string(path)?)
}

pub const CHANNEL_PERMEABILITY: f64 = 500.0;
pub const MATRIX_PERMEABILITY: f64 = 1.0;

/// Channelized binary field on an `n x n` grid: meandering high-permeability
/// channel segments in a unit background. Segments are interrupted by short
/// low-permeability gaps so no channel short-circuits the boundary pressure.
pub fn synthetic_channel_raster(n: usize) -> PermeabilityRaster {
    use std::f64::consts::PI;
    let mut values = vec![MATRIX_PERMEABILITY; n * n];
    // (centerline height, amplitude, wavenumber, phase, half width)
    let channels = [
        (0.18, 0.06, 1.5, 0.0, 0.035),
        (0.47, 0.09, 1.0, 1.3, 0.045),
        (0.78, 0.05, 2.0, 2.1, 0.03),
    ];
    let gap = |x: f64, y: f64| (x - (0.62 + 0.05 * (3.0 * PI * y).sin())).abs() <= 0.025;
    for r in 0..n {
        let y = (r as f64 + 0.5) / n as f64;
        for c in 0..n {
            let x = (c as f64 + 0.5) / n as f64;
            if !(0.08..=0.92).contains(&x) || gap(x, y) {
                continue;
            }
            let in_channel = channels
                .iter()
                .any(|&(y0, a, k, ph, w)| (y - (y0 + a * (2.0 * PI * k * x + ph).sin())).abs() <= w);
            if in_channel {
                values[r * n + c] = CHANNEL_PERMEABILITY;
            }
        }
    }
    PermeabilityRaster {
        width: n,
        height: n,
        values,
    }
}

struct RasterDiffusion<'a> {
    raster: &'a PermeabilityRaster,
}

impl CoefficientField for RasterDiffusion<'_> {
    fn kappa(&self, x: f64, y: f64) -> f64 {
        self.raster.sample(x, y)
    }
    fn velocity(&self, _x: f64, _y: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn source(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }
}

/// Solve `-div(kappa grad p) = 0` with `p = g` on the boundary; returns lattice values.
pub fn solve_darcy_pressure(
    raster: &PermeabilityRaster,
    mesh: &FineMesh,
    boundary: impl Fn(f64, f64) -> f64,
) -> Result<Vec<f64>> {
    let n = mesh.n();
    if raster.width != n || raster.height != n {
        return Err(Error::Config(format!(
            "raster is {}x{} but the fine grid has {n}x{n} elements",
            raster.width, raster.height
        )));
    }
    let field = RasterDiffusion { raster };
    let lat = assemble_lattice(mesh, &field)?;
    let h = mesh.h();
    let nl = mesh.num_lattice_nodes();
    let mut p = vec![0.0; nl];
    let mut interior = Vec::with_capacity(mesh.num_dofs());
    let mut fixed = Vec::new();
    for node in 0..nl {
        let (i, j) = mesh.lattice_coords(node);
        if mesh.dof(i, j).is_some() {
            interior.push(node);
        } else {
            p[node] = boundary(i as f64 * h, j as f64 * h);
            fixed.push(node);
        }
    }
    let a_ii = lat.stiffness.submatrix(&interior, &interior)?;
    let a_ib = lat.stiffness.submatrix(&interior, &fixed)?;
    let g: Vec<f64> = fixed.iter().map(|&k| p[k]).collect();
    let rhs: Vec<f64> = a_ib.mul_vec(&g).iter().map(|v| -v).collect();
    let x = LocalSolver::new(a_ii, "darcy pressure")?.solve(&rhs)?;
    for (&node, v) in interior.iter().zip(x) {
        p[node] = v;
    }
    Ok(p)
}

/// Piecewise velocity `b = sign * kappa grad p` from the Q1 pressure.
#[derive(Debug, Clone)]
pub struct DarcyVelocity {
    pub n: usize,
    pub pressure: Vec<f64>,
    pub raster: PermeabilityRaster,
    pub sign: f64,
}

impl DarcyVelocity {
    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let n = self.n;
        let h = 1.0 / n as f64;
        let ei = ((x / h) as usize).min(n - 1);
        let ej = ((y / h) as usize).min(n - 1);
        let xi = x / h - ei as f64;
        let eta = y / h - ej as f64;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let nodes = [idx(ei, ej), idx(ei + 1, ej), idx(ei + 1, ej + 1), idx(ei, ej + 1)];
        let grads = shape_grad(xi, eta);
        let mut g = [0.0; 2];
        for (node, dn) in nodes.iter().zip(grads) {
            g[0] += self.pressure[*node] * dn[0] / h;
            g[1] += self.pressure[*node] * dn[1] / h;
        }
        let k = self.sign * self.raster.at(ei, ej);
        [k * g[0], k * g[1]]
    }
}

/// Darcy velocity for the Example 5 boundary data `p = xy`.
pub fn darcy_velocity(raster: &PermeabilityRaster, mesh: &FineMesh, sign: f64) -> Result<DarcyVelocity> {
    let pressure = solve_darcy_pressure(raster, mesh, |x, y| x * y)?;
    Ok(DarcyVelocity {
        n: mesh.n(),
        pressure,
        raster: raster.clone(),
        sign,
    })
}
