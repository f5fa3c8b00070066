//! Benchmark examples, experiment sweeps and report output.

pub mod config;
pub mod darcy;
pub mod experiment;
pub mod fields;
pub mod mms;
pub mod report;
pub mod validate;

pub use config::{ExperimentConfig, ReportFormat};
pub use darcy::{darcy_velocity, load_permeability_raster, synthetic_channel_raster, PermeabilityRaster};
pub use experiment::{run_experiment, Offline};
pub use fields::{field_for_example, ExampleField};
pub use mms::{manufactured_error, manufactured_order};
pub use report::{emit_report, ReportRow};
pub use validate::{run_validation, Check};
