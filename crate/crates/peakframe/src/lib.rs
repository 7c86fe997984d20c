//! Two-speed kinetic run-and-tumble chemotaxis in the frame of the moving
//! chemoattractant peak: an upwind solver for the perturbation system, an
//! integral-equation oracle built on exact characteristics, and a
//! hypocoercivity diagnostic suite (weighted norms, modified entropies,
//! conservation laws, decay-rate fits).

pub mod banded;
pub mod characteristics;
pub mod checks;
pub mod chemo;
pub mod constants;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod operators;
pub mod params;
pub mod runner;
pub mod solver;

pub use error::{AbortKind, ModelError, Result};
pub use grid::{Grid, PairField, PairNorms, ScalarField};
pub use params::ModelParams;
