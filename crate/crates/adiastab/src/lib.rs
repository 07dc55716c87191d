//! Numerical engine for certifying intermediate-timescale adiabatic bounds
//! on graded Hamiltonian families.
//!
//! The crate simulates the exact and reference Schrödinger dynamics of a
//! family `A(s) = H(s) + Δ(s)` that respects a fixed grading `S ⊕ S̄`, computes
//! every spectral quantity entering the bounds (Cheeger ratio, local gaps,
//! projectors, reduced resolvents), and checks that the computable upper
//! bounds dominate the measured evolution error.

pub mod bounds;
pub mod config;
pub mod error;
pub mod generators;
pub mod graded;
pub mod operator;
pub mod propagator;
pub mod resolvent;
pub mod spectral;

pub use error::{Error, Result};
pub use operator::{CMatrix, HermitianMatrix, Projector, Tolerances, C64};
