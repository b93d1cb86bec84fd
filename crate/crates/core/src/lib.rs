//! Berezin–Toeplitz quantization of the flat torus `ℝ²/ℤ²` with symplectic
//! form `ω = 4π dp∧dq`.
//!
//! The crate computes quantum propagators and smoothed spectral projectors
//! of Toeplitz operators exactly (spectral sums over a theta-function basis)
//! and compares their Schwartz kernels with semiclassical predictors built
//! from the Hamiltonian flow, its linearization and parallel transport.

pub mod acceptance;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod projector;
pub mod propagator;
pub mod quadrature;
pub mod quantum;
pub mod symplectic;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Serializes a complex number as `[re, im]`.
pub fn serialize_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}
