//! Simulation and optimization of analog quantum protocols on
//! transverse-field Ising instances: QAOA, annealing schedules,
//! bang-anneal-bang control, near-adiabatic two-level dynamics and
//! product-formula error bounds.

pub mod error;
pub mod bab;
pub mod evolution;
pub mod hamiltonian;
pub mod instances;
pub mod near_adiabatic;
pub mod optimal_control;
pub mod qaoa;
pub mod simplex;
pub mod trotter;
pub mod xcheck;

mod ode;
mod propagator;
mod quadrature;
mod spline;

pub use error::{Error, Result};
