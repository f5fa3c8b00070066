//! Multiscale Petrov-Galerkin stabilization for convection-dominated diffusion
//! in heterogeneous media.
//!
//! The pipeline builds a fine Q1 discretization, constructs multiscale trial
//! functions from local snapshots reduced by local spectral problems, builds a
//! matching multiscale test space from adjoint snapshots, and solves the
//! reduced mixed system. Test functions can be enriched online from local
//! residuals.

pub mod assembly;
pub mod coupling;
pub mod error;
pub mod grid;
pub mod harness;
pub mod numerics;
pub mod test_space;
pub mod trial_space;

pub use error::{Error, Result};
