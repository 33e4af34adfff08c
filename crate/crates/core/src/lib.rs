//! Two-dimensional σ-transformed free-surface Navier-Stokes wave model on a
//! nodal spectral element mesh, with a p-multigrid pressure solver.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod mg_solver;
pub mod operators;
pub mod pressure_poisson;
pub mod reference_element;
pub mod sigma_transform;
pub mod time_integration;
pub mod wave_theory;

pub use error::{Error, Result};
