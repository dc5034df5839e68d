//! Two Coulomb-interacting electrons in an anisotropic two-dimensional
//! harmonic trap: finite-coupling spectra by Rayleigh-Ritz diagonalization,
//! natural-orbital occupancies and entanglement entropies, and the
//! strong-coupling limit from the harmonic approximation.

pub mod asymptotic;
pub mod basis;
pub mod cli;
pub mod coulomb;
pub mod error;
pub mod model;
pub mod rdm;
pub mod relative;

pub use error::{Error, Result};
