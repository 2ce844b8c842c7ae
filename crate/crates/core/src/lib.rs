//! Numerical toolkit for thermoelasticity with quasiconvex stored energy.
//!
//! The crate covers the entropy structure of the adiabatic thermoelastic
//! system written in conservation form, strong quasiconvexity and Garding-type
//! estimates for the stored energy, a finite-volume solver, relative-entropy
//! diagnostics and empirical Young measures.

pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod quasiconvexity;
pub mod sampling;
pub mod search;
pub mod solver;
pub mod symmetrizer;
pub mod tensor;
pub mod witness;
pub mod young_measure;

pub use error::{Error, Result};
