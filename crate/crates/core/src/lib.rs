//! Numerical functional calculus for homogeneous sub-Laplacians and central
//! derivatives on 2-step stratified Lie groups.

pub mod decomposition;
pub mod cli;
pub mod error;
pub mod group;
pub mod harness;
pub mod kernel;
pub mod laguerre;
pub mod multiplier;
pub mod plancherel;
pub mod quad;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};
