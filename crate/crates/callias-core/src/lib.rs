//! Numerical index-theory laboratory for strongly Callias-type Dirac
//! operators on 1+1-dimensional Lorentzian cylinders.
//!
//! The crate discretizes a time-dependent Hermitian boundary operator
//! family, evolves the associated first-order hyperbolic equation to
//! obtain a unitary wave propagator, and cross-checks a chain of integer
//! index identities by fully independent computations:
//!
//! * Fredholm indices of spectral-subspace compressions of the propagator,
//! * spectral flow of the boundary family,
//! * eta-invariant / kernel-correction formulas,
//! * the index of the Wick-rotated elliptic boundary value problem.

pub mod discretize;
pub mod error;
pub mod evolve;
pub mod flow_eta;
pub mod model;
pub mod qblocks;
pub mod spectral;
pub mod wickaps;

pub use error::{CoreError, ErrorClass, Result};
