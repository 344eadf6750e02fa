//! Quantum Riemannian Hamiltonian Descent: curved-space Schrödinger
//! dynamics for optimization, its semiclassical limit, convergence-time
//! bounds and query-complexity estimates.

pub mod complexity;
pub mod config;
pub mod discretize;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod semiclassical;

pub use error::{Error, Result};
