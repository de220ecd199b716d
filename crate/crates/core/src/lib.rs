//! Simulation of noisily perturbed integrable systems: classical pair and
//! tangent dynamics of the kicked rotor, OTOCs of the randomly kicked
//! quantum model, the closed moment equations of the quantum tangent space,
//! and the fits used to read growth rates off the resulting series.

pub mod analysis;
pub mod classical;
pub mod error;
pub mod model;
pub mod quantum;
pub mod superop;

pub use error::{Error, Result};
pub use model::{KickSequence, Lattice, LyapunovConvention, ModelSpec, PhysicalUnits};
pub use num_complex::Complex64;
