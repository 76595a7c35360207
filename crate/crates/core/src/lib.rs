//! Boundary-driven symmetric exclusion with non-reversible boundary blocks:
//! exact rates, a master-equation oracle, kinetic Monte Carlo, dual random
//! walks, closed moment solvers and the limiting heat equation.

pub mod boundary;
pub mod dual;
pub mod error;
pub mod field;
pub mod harness;
pub mod kmc;
pub mod linalg;
pub mod master;
pub mod model;
pub mod pde;
pub mod profile;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    Configuration, LatticeSpec, LeftBoundary, ModelSpec, Move, RateTableBoundary,
    StructuredBoundary,
};
pub use profile::InitialProfile;
