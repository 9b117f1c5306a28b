//! Spectral statistics for the Poisson, semi-Poisson and GOE regimes, and the
//! elastic enhancement factor of two-port scattering systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`ensembles`]: seedable generators of synthetic level sequences.
//! - [`billiard`]: rectangular cavity spectra, the Weyl law and point scatterers.
//! - [`unfolding`]: Weyl-law unfolding to unit mean spacing.
//! - [`stats`]: spacing distributions, η estimation, power spectrum of δ_q.
//! - [`scattering`]: S-matrix simulation, enhancement factor estimation and theory.
//! - [`io`]: file formats, configuration and the analysis pipeline behind the CLI.

pub mod billiard;
pub mod ensembles;
pub mod error;
pub mod io;
pub mod scattering;
pub mod stats;
pub mod unfolding;

pub use error::{Error, Result};
pub use ensembles::{EnsembleSpec, LevelSequence, RandomSeed, StatKind};
