//! Measurement-induced diffusion in periodically kicked quantum systems.
//!
//! The crate builds the kick transition matrix of a kicked system, propagates
//! momentum occupation probabilities under repeated projective measurements,
//! and compares the result with coherent evolution, the classical twist map,
//! an angle-randomized classical map, and a unitary spin-register
//! measurement model.

pub mod bessel;
pub mod classical;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod kick;
pub mod measurement;
pub mod model;
pub mod observables;
pub mod output;
pub mod report;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{
    build_system, FreeHamiltonian, Harmonic, KickedSystem, MomentumDistribution, Potential,
    StateVector, SystemParams,
};
