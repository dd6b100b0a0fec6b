//! Amyloid-beta modified Barreto-Cressman neuron model with a space-clamped
//! driver and a polytopal discontinuous Galerkin monodomain solver.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dg;
pub mod error;
pub mod ingest;
pub mod ionic;
pub mod linalg;
pub mod mesh;
pub mod ode;
pub mod output;
pub mod params;
pub mod solver;

pub use error::{Error, Result};
