//! Variational Monte Carlo for three-dimensional fracton stabilizer codes.

pub mod ansatz;
pub mod bits;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exact_solver;
pub mod lattice;
pub mod optimizer;
pub mod sampler;
pub mod stabilizer;
pub mod sweep;

pub use error::{Error, Result};
