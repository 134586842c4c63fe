//! Quantum cat maps on the two-torus at desk scale.
//!
//! The crate builds the quantized propagator of a hyperbolic toral
//! automorphism from its exact intertwining relation with phase-space
//! translations, diagonalizes it, and measures eigenstate matrix elements
//! against majorant/minorant observables of small balls.

pub mod arithmetic;
pub mod bsapprox;
pub mod error;
pub mod fft;
pub mod hilbert;
pub mod linalg;
pub mod propagator;
pub mod stats;

pub use error::{CatError, Result};
