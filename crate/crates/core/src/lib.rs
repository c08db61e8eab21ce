//! Numerical engine for discrete random energies with degenerate growth:
//! lattice cell problems, homogenized densities and the inequalities that
//! control them.

pub mod cli;
pub mod energy;
pub mod environment;
pub mod error;
pub mod gluing;
pub mod homogenize;
pub mod inequalities;
pub mod lattice;
pub mod potentials;
pub mod solver;
pub mod util;

pub use error::{Error, Result};
