//! Coefficient fields of the five benchmark examples.

use std::f64::consts::{PI, SQRT_2};

use crate::assembly::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::FineMesh;
use crate::harness::config::ExperimentConfig;
use crate::harness::darcy::{darcy_velocity, load_permeability_raster, synthetic_channel_raster, DarcyVelocity};

#[derive(Debug, Clone)]
pub enum ExampleField {
    /// Examples 1 and 2: cellular flow, with a `delta` perturbation in Example 2.
    Cellular { alpha: f64, delta: f64 },
    /// Example 3: velocity from a stream function, diffusion `alpha`.
    StreamFunction { alpha: f64 },
    /// Example 4: layered shear flow.
    Channel,
    /// Example 5: Darcy velocity through a channelized permeability.
    Darcy { alpha: f64, flow: DarcyVelocity },
}

fn cellular(alpha: f64, delta: f64, x: f64, y: f64) -> [f64; 2] {
    let p = 18.0 * PI;
    let q = 18.0 * SQRT_2 * PI;
    [
        alpha * ((p * x).sin() * (p * y).cos() + delta * (q * x).cos() * (q * y).sin()),
        alpha * (-(p * x).cos() * (p * y).sin() - delta * (q * x).sin() * (q * y).sin()),
    ]
}

/// `H = sin(5 pi x) sin(6 pi y) / (60 pi) + 0.005 (x + y)`.
pub fn stream_function(x: f64, y: f64) -> f64 {
    (5.0 * PI * x).sin() * (6.0 * PI * y).sin() / (60.0 * PI) + 0.005 * (x + y)
}

/// `(-dH/dy, dH/dx)`.
fn stream_velocity(x: f64, y: f64) -> [f64; 2] {
    let hx = (5.0 * PI * x).cos() * (6.0 * PI * y).sin() / 12.0 + 0.005;
    let hy = (5.0 * PI * x).sin() * (6.0 * PI * y).cos() / 10.0 + 0.005;
    [-hy, hx]
}

impl CoefficientField for ExampleField {
    fn kappa(&self, _x: f64, _y: f64) -> f64 {
        match self {
            Self::Cellular { .. } => 0.01,
            Self::StreamFunction { alpha } | Self::Darcy { alpha, .. } => *alpha,
            Self::Channel => 1.0,
        }
    }

    fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            Self::Cellular { alpha, delta } => cellular(*alpha, *delta, x, y),
            Self::StreamFunction { .. } => stream_velocity(x, y),
            Self::Channel => [200.0 * (18.0 * SQRT_2 * PI * y).sin(), 0.0],
            Self::Darcy { flow, .. } => flow.velocity(x, y),
        }
    }

    fn source(&self, _x: f64, _y: f64) -> f64 {
        1.0
    }
}

pub fn field_for_example(config: &ExperimentConfig) -> Result<ExampleField> {
    let alpha = config.alpha();
    match config.example {
        1 => Ok(ExampleField::Cellular { alpha, delta: 0.0 }),
        2 => Ok(ExampleField::Cellular {
            alpha,
            delta: config.delta,
        }),
        3 => Ok(ExampleField::StreamFunction { alpha }),
        4 => Ok(ExampleField::Channel),
        5 => {
            let mesh = FineMesh::new(config.fine)?;
            let raster = match &config.raster {
                Some(path) => load_permeability_raster(path)?,
                None => synthetic_channel_raster(config.fine),
            };
            let flow = darcy_velocity(&raster, &mesh, config.velocity_sign)?;
            Ok(ExampleField::Darcy { alpha, flow })
        }
        other => Err(Error::Config(format!("unknown example {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_one_point_value() {
        let f = ExampleField::Cellular { alpha: 2.0, delta: 0.0 };
        let b = f.velocity(0.25, 0.25);
        let s = (4.5 * PI).sin();
        let c = (4.5 * PI).cos();
        assert!((b[0] - 2.0 * s * c).abs() < 1e-14);
        assert!((b[1] + 2.0 * c * s).abs() < 1e-14);
        let b = f.velocity(0.1, 0.3);
        assert!((b[0] - 2.0 * (1.8 * PI).sin() * (5.4 * PI).cos()).abs() < 1e-13);
    }

    #[test]
    fn cellular_flow_is_divergence_free() {
        let f = ExampleField::Cellular { alpha: 2.0, delta: 0.0 };
        let e = 1e-6;
        for k in 0..50 {
            let x = 0.013 + 0.019 * k as f64;
            let y = 0.971 - 0.017 * k as f64;
            let div = (f.velocity(x + e, y)[0] - f.velocity(x - e, y)[0]) / (2.0 * e)
                + (f.velocity(x, y + e)[1] - f.velocity(x, y - e)[1]) / (2.0 * e);
            let b = f.velocity(x, y);
            assert!(div.abs() <= 1e-6 * b[0].hypot(b[1]).max(1.0), "div {div}");
        }
    }

    #[test]
    fn delta_zero_reduces_example_two_to_one() {
        let one = ExampleField::Cellular { alpha: 4.0, delta: 0.0 };
        let cfg = ExperimentConfig {
            example: 2,
            alpha: Some(4.0),
            delta: 0.0,
            ..Default::default()
        };
        let two = field_for_example(&cfg).unwrap();
        for k in 0..20 {
            let (x, y) = (0.05 * k as f64, 1.0 - 0.045 * k as f64);
            assert_eq!(one.velocity(x, y), two.velocity(x, y));
        }
    }

    #[test]
    fn stream_velocity_matches_finite_differences() {
        let f = ExampleField::StreamFunction { alpha: 1e-3 };
        let e = 1e-5;
        for k in 0..30 {
            let x = 0.03 + 0.031 * k as f64;
            let y = 0.9 - 0.027 * k as f64;
            let hx = (stream_function(x + e, y) - stream_function(x - e, y)) / (2.0 * e);
            let hy = (stream_function(x, y + e) - stream_function(x, y - e)) / (2.0 * e);
            let b = f.velocity(x, y);
            assert!((b[0] + hy).abs() < 1e-8 && (b[1] - hx).abs() < 1e-8);
        }
    }

    #[test]
    fn channel_and_darcy_fields() {
        let f = ExampleField::Channel;
        assert_eq!(f.kappa(0.3, 0.3), 1.0);
        let y = 1.0 / (36.0 * SQRT_2);
        assert!((f.velocity(0.7, y)[0] - 200.0).abs() < 1e-10);
        let cfg = ExperimentConfig {
            example: 5,
            fine: 16,
            coarse: 4,
            ..Default::default()
        };
        let d = field_for_example(&cfg).unwrap();
        assert_eq!(d.kappa(0.5, 0.5), 1.0 / 250.0);
        let flipped = field_for_example(&ExperimentConfig { velocity_sign: -1.0, ..cfg }).unwrap();
        let (a, b) = (d.velocity(0.4, 0.6), flipped.velocity(0.4, 0.6));
        assert_eq!(a[0], -b[0]);
        assert!(field_for_example(&ExperimentConfig { example: 9, ..Default::default() }).is_err());
    }
}
