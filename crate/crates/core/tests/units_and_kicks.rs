use approx::assert_relative_eq;
use proptest::prelude::*;
use quasichaos::model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Rebuild the dimensional classical rate from (m, α, ν, ħ, ε) and compare
// with ω₀ times the adimensional moment-closure rate.
#[test]
fn restoring_units_gives_back_the_physical_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let units = PhysicalUnits {
            mass: rng.random_range(0.1..10.0),
            strength: rng.random_range(0.1..10.0),
            power: rng.random_range(2.5..12.0),
            hbar: rng.random_range(0.1..2.0),
            noise_variance: rng.random_range(1e-6..1e-2),
        };
        let a = derive_adimensional(&units).unwrap();
        let n0: f64 = rng.random_range(50.0..500.0);
        let lam_adim = quantum_lyapunov_rate(a.gamma, a.mu, a.eps_tilde, n0, LyapunovConvention::MomentClosure);

        let eps_phys = units.hbar.powi(2) * a.omega0 * a.eps_tilde;
        let curvature = a.omega0 * a.gamma * (a.gamma - 1.0) * n0.powf(a.gamma - 2.0) / units.hbar;
        let qbar = (2.0 * n0.powf(2.0 * a.mu)).sqrt();
        let lam_phys = classical_lyapunov_prediction(eps_phys, curvature, qbar);
        assert_relative_eq!(lam_phys, a.omega0 * lam_adim, max_relative = 1e-12);
    }
}

#[test]
fn gamma_and_mu_follow_the_power() {
    for (nu, gamma) in [(2.0, 1.0), (4.0, 4.0 / 3.0), (6.0, 1.5), (f64::INFINITY, 2.0)] {
        let a = derive_adimensional(&PhysicalUnits { mass: 1.0, strength: 1.0, power: nu, hbar: 1.0, noise_variance: 1.0 })
            .unwrap();
        assert_relative_eq!(a.gamma, gamma, max_relative = 1e-14);
        assert_relative_eq!(a.mu, 1.0 - gamma / 2.0, max_relative = 1e-14, epsilon = 1e-15);
    }
}

#[test]
fn kicks_do_not_depend_on_the_pool() {
    let spec = ModelSpec::new(2.0, 0.0, 3.0, 0.01, Lattice::Symmetric { size: 64 }, 0).unwrap();
    let draw = |workers| {
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap().install(|| {
            use rayon::prelude::*;
            (0..32u64).into_par_iter().map(|i| generate_kicks(99, i, &spec, 500).amplitudes).collect::<Vec<_>>()
        })
    };
    let one = draw(1);
    assert_eq!(one, draw(4));
    assert_eq!(one[3], generate_kicks(99, 3, &spec, 500).amplitudes);
}

#[test]
fn kick_statistics() {
    let k = generate_kicks_raw(5, 0, 4.0, 0.25, 200_000).amplitudes;
    let n = k.len() as f64;
    let mean = k.iter().sum::<f64>() / n;
    let var = k.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    // Variance τε̃ = 1, standard error of the variance ≈ √(2/n).
    assert!(mean.abs() < 4.0 / n.sqrt());
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
}

proptest! {
    #[test]
    fn qbar_ignores_phases(
        amps in proptest::collection::vec(-2.0..2.0f64, 1..5),
        phases in proptest::collection::vec(0.0..6.283f64, 5),
        shift in 0.0..6.283f64,
    ) {
        let q = AngleSeries {
            constant: 0.7,
            harmonics: amps
                .iter()
                .enumerate()
                .map(|(i, a)| Harmonic { order: i as u32 + 1, cos: a * phases[i].cos(), sin: a * phases[i].sin() })
                .collect(),
        };
        let base = qbar(&q);
        prop_assert!((qbar(&q.shifted(shift)) - base).abs() <= 1e-12 * base.max(1.0));
    }
}
