//! Genus-two free-fermion partition functions, Szegő kernels and generating
//! forms on a surface built by sewing two tori with `z₁z₂ = ε`.

pub mod coeffs;
pub mod error;
pub mod fermion;
pub mod graphs;
pub mod linalg;
pub mod modular;
pub mod qseries;
pub mod sewing;

pub use error::{Error, Result};
