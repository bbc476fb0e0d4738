//! Numerical toolkit for continuous one-dimensional Schrödinger operators
//! `-y'' + V(t, θ + tω) y` with potentials quasiperiodic in time.
//!
//! Modules:
//! - [`potential`]: analytic trigonometric potentials and their restriction to lines.
//! - [`transfer`]: overflow-safe transfer matrices and fundamental solutions.
//! - [`green`]: Dirichlet Green's functions, decay windows, localized eigenfunctions.
//! - [`lyapunov`]: phase-averaged exponents, Avalanche Principle, large deviations.
//! - [`faber`]: Faber series on intervals and polynomial surrogates of transfer matrices.
//! - [`arithmetic`]: Diophantine checks, orbit discrepancy, resonance scans.

pub mod arithmetic;
pub mod error;
pub mod faber;
pub mod green;
pub mod lyapunov;
mod par;
pub mod potential;
pub mod scalar;
pub mod transfer;

pub use error::{Error, Result};
pub use potential::AnalyticPotential;
pub use scalar::Scalar;
pub use transfer::{Interval, IntegratorConfig, ScaledMatrix2, TransferSolution};
