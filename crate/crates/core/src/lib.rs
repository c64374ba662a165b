//! Thermodynamic formalism for generalized Curie-Weiss-Potts models.

pub mod alphabet;
pub mod config;
pub mod error;
pub mod observable;
pub mod potential;
pub mod pressure;
pub mod quadratic;
pub mod pgm;
pub mod quadrature;
pub mod sampling;
pub mod xy;
pub mod transfer;

pub use error::{Error, Result};
