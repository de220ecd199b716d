use quasichaos::analysis::fit_lyapunov;
use quasichaos::classical::*;
use quasichaos::model::classical_lyapunov_prediction;

const ROTOR_QBAR: f64 = std::f64::consts::SQRT_2;

#[test]
fn tangent_moments_follow_the_moment_ode() {
    let (eps, dt) = (1.0, 1e-3);
    let samples = [250, 500, 1000, 1500, 2000];
    let init = TangentVector { u_action: 0.0, u_angle: 1.0 };
    let m = tangent_moments(eps, dt, 2000, &samples, 10_000, 21, init).unwrap();
    let exact = moment_trajectory(eps, 1.0, ROTOR_QBAR, [0.0, 1.0, 0.0], &m.times);
    for (s, want) in exact.iter().enumerate() {
        for c in 0..3 {
            let z = (m.mean[s][c] - want[c]) / m.stderr[s][c].max(1e-300);
            assert!(z.abs() < 3.0, "t = {}, component {c}: {} vs {} ({z:.2} SE)", m.times[s], m.mean[s][c], want[c]);
        }
    }
}

struct Saturation {
    estimate: f64,
    measured: f64,
    action_at_estimate: f64,
}

// Pair ensemble with the angle separation read off at one Lyapunov time.
fn saturation(eps: f64) -> Saturation {
    let lambda = classical_lyapunov_prediction(eps, 1.0, ROTOR_QBAR);
    let dt = 0.02 / lambda;
    let steps = (40.0 / lambda / dt) as usize;
    let cfg = PairEnsembleConfig {
        eps,
        dt,
        steps,
        sample_steps: (0..=steps).step_by(10).collect(),
        pairs: 400,
        seed: 8,
        initial_action: 1.0,
        separation: 1e-9,
    };
    let s = pair_ensemble(&cfg).unwrap();
    let at = |t: f64| s.times.iter().position(|&x| x >= t).unwrap();
    // ⟨(cosΘ₁ − cosΘ₂)²⟩ = u_Θ²/2 while the separation is small.
    let u_angle = (2.0 * s.mean_sq_ucos[at(1.0 / lambda)]).sqrt();
    let estimate = saturation_time_estimate(lambda, u_angle).unwrap();
    let fit = fit_lyapunov(&s.times, &s.mean_sq_ucos, lambda).unwrap();
    Saturation {
        estimate,
        measured: fit.prescrambling_time,
        action_at_estimate: s.mean_sq_uaction[at(estimate)].sqrt(),
    }
}

#[test]
fn saturation_estimate_brackets_the_measured_onset() {
    for eps in [1e-6, 1e-9] {
        let s = saturation(eps);
        let ratio = s.measured / s.estimate;
        assert!((0.5..2.0).contains(&ratio), "eps {eps}: measured {} estimate {}", s.measured, s.estimate);
        assert!(s.action_at_estimate < 0.1, "eps {eps}: u_I(t_s) = {}", s.action_at_estimate);
    }
}

#[test]
fn pair_ensemble_is_pool_independent() {
    let cfg = PairEnsembleConfig {
        eps: 1e-4,
        dt: 0.5,
        steps: 300,
        sample_steps: vec![0, 100, 200, 300],
        pairs: 37,
        seed: 4,
        initial_action: 1.0,
        separation: 1e-8,
    };
    let run = |w| rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(|| pair_ensemble(&cfg).unwrap());
    assert_eq!(run(1), run(5));
}
