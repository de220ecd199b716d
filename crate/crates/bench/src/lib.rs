//! Shared fixtures for the benchmarks.

use quasichaos::classical::PairEnsembleConfig;
use quasichaos::model::generate_kicks;
use quasichaos::{Lattice, ModelSpec};

/// Rotor at the default working point on a lattice of `size` levels.
pub fn rotor(size: usize) -> ModelSpec {
    ModelSpec::with_lyapunov_tau(2.0, 1e4, Lattice::HalfLine { size }, size as i64 / 2, 0.01).unwrap()
}

pub fn kicks(spec: &ModelSpec, steps: usize) -> Vec<f64> {
    generate_kicks(7, 0, spec, steps).amplitudes
}

pub fn pairs(pairs: usize, steps: usize) -> PairEnsembleConfig {
    PairEnsembleConfig {
        eps: 1e-6,
        dt: 0.05,
        steps,
        sample_steps: (0..=steps).step_by(50).collect(),
        pairs,
        seed: 7,
        initial_action: 1.0,
        separation: 1e-9,
    }
}
