//! Bayesian nonparametric estimation of the spectral density and memory
//! parameter of stationary Gaussian long-memory series, using FEXP priors
//! and the exact Toeplitz likelihood.

pub mod divergences;
pub mod error;
pub mod harness;
pub mod posterior;
pub mod prior;
pub mod quadrature;
pub mod simulate;
pub mod spectral;
pub mod toeplitz;

pub use error::{Error, Result};
