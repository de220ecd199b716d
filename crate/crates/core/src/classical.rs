//! Classical randomly kicked rotor `H = I²/2 + 2 ε^{1/2} η(t) cosΘ`:
//! the kick-drift map, its tangent map, pair ensembles and the closed
//! quadratic-moment system.

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{generate_kicks_raw, realization_rng, TWO_PI};

/// Phase point in action-angle variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub action: f64,
    /// Angle in `[0, 2π)`.
    pub angle: f64,
}

impl ClassicalState {
    pub fn new(action: f64, angle: f64) -> Self {
        ClassicalState { action, angle: wrap_angle(angle) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TangentVector {
    pub u_action: f64,
    pub u_angle: f64,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.u_action.hypot(self.u_angle)
    }
}

#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// One kick of amplitude `r` followed by a free drift of duration `dt`:
/// `I ← I + 2r sinΘ`, then `Θ ← Θ + I dt (mod 2π)`.
#[inline]
pub fn step_map(state: ClassicalState, r: f64, dt: f64) -> ClassicalState {
    let action = state.action + 2.0 * r * state.angle.sin();
    ClassicalState { action, angle: wrap_angle(state.angle + action * dt) }
}

/// Linearization of [`step_map`] around `state` (the point before the kick).
/// The kick is the shear `u_I ← u_I + 2r cosΘ u_Θ`, the drift the shear
/// `u_Θ ← u_Θ + H″ u_I dt` with `H″ = 1`.
#[inline]
pub fn step_tangent(tv: TangentVector, state: ClassicalState, r: f64, dt: f64) -> TangentVector {
    let u_action = tv.u_action + 2.0 * r * state.angle.cos() * tv.u_angle;
    TangentVector { u_action, u_angle: tv.u_angle + u_action * dt }
}

/// Jacobian of one map step at `state`.
pub fn step_jacobian(state: ClassicalState, r: f64, dt: f64) -> Matrix2<f64> {
    let k = 2.0 * r * state.angle.cos();
    Matrix2::new(1.0, k, dt, 1.0 + k * dt)
}

/// Separation of one pair of trajectories at the sample steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTrace {
    pub steps: Vec<usize>,
    pub u_action: Vec<f64>,
    /// `cosΘ⁽¹⁾ − cosΘ⁽²⁾`.
    pub u_cos: Vec<f64>,
}

/// Evolves two trajectories with the same kicks and records their
/// separation after each step listed in `sample_steps` (0 is the initial
/// condition). `sample_steps` must be sorted.
pub fn evolve_pair(
    s1: ClassicalState,
    s2: ClassicalState,
    kicks: &[f64],
    dt: f64,
    sample_steps: &[usize],
) -> Result<PairTrace> {
    check_samples(sample_steps, kicks.len())?;
    let mut out = PairTrace { steps: sample_steps.to_vec(), u_action: Vec::new(), u_cos: Vec::new() };
    let (mut a, mut b) = (s1, s2);
    let mut next = 0;
    for step in 0..=kicks.len() {
        while next < sample_steps.len() && sample_steps[next] == step {
            out.u_action.push(a.action - b.action);
            out.u_cos.push(a.angle.cos() - b.angle.cos());
            next += 1;
        }
        if next == sample_steps.len() {
            break;
        }
        let r = kicks[step];
        a = step_map(a, r, dt);
        b = step_map(b, r, dt);
    }
    Ok(out)
}

/// Tangent vector evolved along the reference trajectory from `s`.
pub fn evolve_tangent(
    s: ClassicalState,
    tv: TangentVector,
    kicks: &[f64],
    dt: f64,
    sample_steps: &[usize],
) -> Result<Vec<TangentVector>> {
    check_samples(sample_steps, kicks.len())?;
    let mut out = Vec::with_capacity(sample_steps.len());
    let (mut x, mut u) = (s, tv);
    let mut next = 0;
    for step in 0..=kicks.len() {
        while next < sample_steps.len() && sample_steps[next] == step {
            out.push(u);
            next += 1;
        }
        if next == sample_steps.len() {
            break;
        }
        u = step_tangent(u, x, kicks[step], dt);
        x = step_map(x, kicks[step], dt);
    }
    Ok(out)
}

fn check_samples(sample_steps: &[usize], steps: usize) -> Result<()> {
    if sample_steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("sample steps must be sorted".into()));
    }
    if let Some(&last) = sample_steps.last() {
        if last > steps {
            return Err(Error::InvalidInput(format!("sample step {last} exceeds the {steps} kicks")));
        }
    }
    Ok(())
}

/// Parameters of a pair ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEnsembleConfig {
    pub eps: f64,
    pub dt: f64,
    pub steps: usize,
    pub sample_steps: Vec<usize>,
    pub pairs: usize,
    pub seed: u64,
    /// Initial action of the reference trajectory.
    pub initial_action: f64,
    /// Initial norm of the separation in `(I, Θ)`.
    pub separation: f64,
}

/// Ensemble statistics of pair separations. `mean_log_*` are quenched
/// averages of `ln|u|`, `mean_sq_*` annealed averages of `u²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSeries {
    pub times: Vec<f64>,
    pub mean_log_ucos: Vec<f64>,
    pub mean_log_uaction: Vec<f64>,
    pub mean_sq_ucos: Vec<f64>,
    pub mean_sq_uaction: Vec<f64>,
    pub n_realizations: usize,
}

/// Initial pair of realization `index`: uniform angle, separation of the
/// given norm in a uniformly random direction.
pub fn initial_pair(seed: u64, index: u64, action: f64, separation: f64) -> (ClassicalState, ClassicalState) {
    let mut rng = realization_rng(seed, index, 1);
    let theta = rng.random::<f64>() * TWO_PI;
    let phi = rng.random::<f64>() * TWO_PI;
    let s1 = ClassicalState::new(action, theta);
    let s2 = ClassicalState::new(action + separation * phi.cos(), theta + separation * phi.sin());
    (s1, s2)
}

/// Runs the pair ensemble on the current rayon pool. Realizations are
/// reduced in index order, so results do not depend on the pool size.
pub fn pair_ensemble(cfg: &PairEnsembleConfig) -> Result<SeparationSeries> {
    if !(cfg.dt > 0.0) || !(cfg.eps >= 0.0) || cfg.pairs == 0 {
        return Err(Error::InvalidInput("pair ensemble needs dt > 0, eps >= 0 and at least one pair".into()));
    }
    check_samples(&cfg.sample_steps, cfg.steps)?;
    let traces: Vec<PairTrace> = (0..cfg.pairs as u64)
        .into_par_iter()
        .map(|i| {
            let kicks = generate_kicks_raw(cfg.seed, i, cfg.eps, cfg.dt, cfg.steps);
            let (s1, s2) = initial_pair(cfg.seed, i, cfg.initial_action, cfg.separation);
            evolve_pair(s1, s2, &kicks.amplitudes, cfg.dt, &cfg.sample_steps)
        })
        .collect::<Result<_>>()?;
    let k = cfg.sample_steps.len();
    let mut out = SeparationSeries {
        times: cfg.sample_steps.iter().map(|&s| s as f64 * cfg.dt).collect(),
        mean_log_ucos: vec![0.0; k],
        mean_log_uaction: vec![0.0; k],
        mean_sq_ucos: vec![0.0; k],
        mean_sq_uaction: vec![0.0; k],
        n_realizations: cfg.pairs,
    };
    for tr in &traces {
        for s in 0..k {
            out.mean_log_ucos[s] += tr.u_cos[s].abs().ln();
            out.mean_log_uaction[s] += tr.u_action[s].abs().ln();
            out.mean_sq_ucos[s] += tr.u_cos[s] * tr.u_cos[s];
            out.mean_sq_uaction[s] += tr.u_action[s] * tr.u_action[s];
        }
    }
    let n = cfg.pairs as f64;
    for v in [&mut out.mean_log_ucos, &mut out.mean_log_uaction, &mut out.mean_sq_ucos, &mut out.mean_sq_uaction] {
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// Noise-averaged second moments `(⟨u_I²⟩, ⟨u_Θ²⟩, ⟨u_I u_Θ⟩)` of tangent
/// vectors, with their standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentMoments {
    pub times: Vec<f64>,
    pub mean: Vec<[f64; 3]>,
    pub stderr: Vec<[f64; 3]>,
    pub n_realizations: usize,
}

/// Tangent ensemble started from `u = initial` at uniformly random angles.
pub fn tangent_moments(
    eps: f64,
    dt: f64,
    steps: usize,
    sample_steps: &[usize],
    realizations: usize,
    seed: u64,
    initial: TangentVector,
) -> Result<TangentMoments> {
    check_samples(sample_steps, steps)?;
    if realizations < 2 {
        return Err(Error::InvalidInput("need at least two realizations".into()));
    }
    let runs: Vec<Vec<TangentVector>> = (0..realizations as u64)
        .into_par_iter()
        .map(|i| {
            let kicks = generate_kicks_raw(seed, i, eps, dt, steps);
            let (s, _) = initial_pair(seed, i, 0.0, 0.0);
            evolve_tangent(s, initial, &kicks.amplitudes, dt, sample_steps)
        })
        .collect::<Result<_>>()?;
    let n = realizations as f64;
    let mut mean = vec![[0.0; 3]; sample_steps.len()];
    let mut sq = vec![[0.0; 3]; sample_steps.len()];
    for run in &runs {
        for (s, u) in run.iter().enumerate() {
            let q = [u.u_action * u.u_action, u.u_angle * u.u_angle, u.u_action * u.u_angle];
            for c in 0..3 {
                mean[s][c] += q[c];
                sq[s][c] += q[c] * q[c];
            }
        }
    }
    let mut stderr = vec![[0.0; 3]; sample_steps.len()];
    for s in 0..sample_steps.len() {
        for c in 0..3 {
            mean[s][c] /= n;
            let var = (sq[s][c] / n - mean[s][c] * mean[s][c]).max(0.0) * n / (n - 1.0);
            stderr[s][c] = (var / n).sqrt();
        }
    }
    Ok(TangentMoments {
        times: sample_steps.iter().map(|&s| s as f64 * dt).collect(),
        mean,
        stderr,
        n_realizations: realizations,
    })
}

/// Generator of the moment system for `(⟨u_I²⟩, ⟨u_Θ²⟩, ⟨u_I u_Θ⟩)`.
pub fn moment_matrix(eps: f64, curvature: f64, qbar: f64) -> Matrix3<f64> {
    Matrix3::new(
        0.0, eps * qbar * qbar, 0.0,
        0.0, 0.0, 2.0 * curvature,
        curvature, 0.0, 0.0,
    )
}

/// Largest real part among the eigenvalues of [`moment_matrix`], the
/// annealed growth rate `2λ` of the squared separation.
pub fn moment_growth(eps: f64, curvature: f64, qbar: f64) -> f64 {
    let a = moment_matrix(eps, curvature, qbar);
    let z = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    // The QR estimate is good to ~1e-9; polish it on det(z − A) = z³ − c₂z² + c₁z − c₀.
    let c2 = a.trace();
    let c1 = (a * a).trace();
    let c1 = 0.5 * (c2 * c2 - c1);
    let c0 = a.determinant();
    let mut z = z;
    for _ in 0..3 {
        let p = ((z - c2) * z + c1) * z - c0;
        let dp = (3.0 * z - 2.0 * c2) * z + c1;
        if dp == 0.0 {
            break;
        }
        z -= p / dp;
    }
    z
}

/// Exact solution `exp(A t) m₀` of the moment system at each time.
pub fn moment_trajectory(eps: f64, curvature: f64, qbar: f64, initial: [f64; 3], times: &[f64]) -> Vec<[f64; 3]> {
    let a = moment_matrix(eps, curvature, qbar);
    let m0 = Vector3::from(initial);
    times
        .iter()
        .map(|&t| {
            let m = (a * t).exp() * m0;
            [m[0], m[1], m[2]]
        })
        .collect()
}

/// Time at which the angle separation reaches `2π`,
/// `t_s ≈ λ⁻¹ ln(2π / u_Θ(λ⁻¹))`. Zero if it is already there.
pub fn saturation_time_estimate(lambda: f64, u_angle_at_lyapunov_time: f64) -> Result<f64> {
    let u = u_angle_at_lyapunov_time;
    if u >= TWO_PI {
        return Ok(0.0);
    }
    if !(u > 0.0) || !(lambda > 0.0) {
        return Err(Error::Domain(format!("need lambda > 0 and u > 0, got lambda = {lambda}, u = {u}")));
    }
    Ok((TWO_PI / u).ln() / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::classical_lyapunov_prediction;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    #[test]
    fn single_step_by_hand() {
        let s = step_map(ClassicalState::new(0.0, FRAC_PI_2), 1.0, 1.0);
        assert_eq!(s.action, 2.0);
        assert_relative_eq!(s.angle, FRAC_PI_2 + 2.0, max_relative = 1e-15);
    }

    #[test]
    fn free_motion_and_symmetric_points() {
        let s = step_map(ClassicalState::new(0.3, 1.0), 0.0, 2.0);
        assert_eq!(s.action, 0.3);
        assert_relative_eq!(s.angle, 1.6, max_relative = 1e-15);
        let s = step_map(ClassicalState::new(0.3, 0.0), 5.0, 1.0);
        assert_eq!(s.action, 0.3);
        let s = step_map(ClassicalState::new(0.3, PI), 5.0, 1.0);
        assert!((s.action - 0.3).abs() < 1e-14);
    }

    #[test]
    fn angle_stays_reduced() {
        let mut s = ClassicalState::new(-3.7, 0.1);
        for k in 0..1000 {
            s = step_map(s, (k as f64).sin(), 0.77);
            assert!((0.0..TWO_PI).contains(&s.angle));
        }
        assert_eq!(wrap_angle(-1e-300), 0.0);
    }

    #[test]
    fn identical_pair_never_separates() {
        let s = ClassicalState::new(0.2, 1.3);
        let kicks: Vec<f64> = (0..500).map(|k| 0.1 * (k as f64 * 0.37).sin()).collect();
        let samples: Vec<usize> = (0..=500).step_by(50).collect();
        let tr = evolve_pair(s, s, &kicks, 0.1, &samples).unwrap();
        assert!(tr.u_action.iter().chain(&tr.u_cos).all(|&u| u == 0.0));
    }

    #[test]
    fn free_shear_is_ballistic() {
        let delta = 1e-6;
        let s1 = ClassicalState::new(1.0, 0.5);
        let s2 = ClassicalState::new(1.0 + delta, 0.5);
        let kicks = vec![0.0; 1000];
        let samples: Vec<usize> = (0..=1000).step_by(100).collect();
        let tr = evolve_pair(s1, s2, &kicks, 0.01, &samples).unwrap();
        for (k, &step) in samples.iter().enumerate() {
            assert_relative_eq!(tr.u_action[k], -delta, max_relative = 1e-9);
            let t = step as f64 * 0.01;
            assert!(tr.u_cos[k].abs() <= delta * t + 1e-12);
        }
    }

    #[test]
    fn tangent_drift_block() {
        let u = step_tangent(TangentVector { u_action: 0.5, u_angle: 0.25 }, ClassicalState::new(0.0, 1.0), 0.0, 0.1);
        assert_eq!(u.u_action, 0.5);
        assert_relative_eq!(u.u_angle, 0.3, max_relative = 1e-15);
        let z = step_tangent(TangentVector::default(), ClassicalState::new(0.0, 1.0), 3.0, 0.1);
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let kicks = generate_kicks_raw(3, 0, 1e-2, 0.1, 1000).amplitudes;
        let s1 = ClassicalState::new(0.0, 1.0);
        let dir = TangentVector { u_action: 0.6, u_angle: 0.8 };
        let tv = evolve_tangent(s1, dir, &kicks, 0.1, &[1000]).unwrap()[0];
        let error = |delta: f64| {
            let s2 = ClassicalState::new(dir.u_action * delta, 1.0 + dir.u_angle * delta);
            let tr = evolve_pair(s2, s1, &kicks, 0.1, &[1000]).unwrap();
            (tr.u_action[0] / delta - tv.u_action).abs()
        };
        // First order in the separation: ten times smaller separation, ten
        // times smaller error.
        let ratio = error(1e-6) / error(1e-7);
        assert!((5.0..20.0).contains(&ratio), "ratio {ratio}");
        assert!(error(1e-8) < 1e-2 * tv.norm());
    }

    #[test]
    fn moment_eigenvalue_example() {
        assert_relative_eq!(moment_growth(1.0, 1.0, 2f64.sqrt()), 4f64.cbrt(), max_relative = 1e-12);
        assert!(moment_growth(0.0, 1.0, 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn moment_trajectory_solves_the_ode() {
        let init = [0.0, 1.0, 0.0];
        let h = 1e-4;
        let t = 1.3;
        let m = moment_trajectory(0.7, 1.1, 1.4, init, &[t - h, t, t + h]);
        let a = moment_matrix(0.7, 1.1, 1.4);
        let v = Vector3::from(m[1]);
        let rhs = a * v;
        for c in 0..3 {
            let d = (m[2][c] - m[0][c]) / (2.0 * h);
            assert_relative_eq!(d, rhs[c], max_relative = 1e-6);
        }
    }

    #[test]
    fn saturation_time_cases() {
        assert_relative_eq!(saturation_time_estimate(1.0, TWO_PI / E).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(saturation_time_estimate(1.0, TWO_PI).unwrap(), 0.0);
        assert_eq!(saturation_time_estimate(1.0, 10.0).unwrap(), 0.0);
        assert!(saturation_time_estimate(1.0, 0.0).is_err());
        assert!(saturation_time_estimate(0.0, 1.0).is_err());
    }

    #[test]
    fn ensemble_does_not_depend_on_pool_size() {
        let cfg = PairEnsembleConfig {
            eps: 1e-3,
            dt: 0.1,
            steps: 400,
            sample_steps: (0..=400).step_by(40).collect(),
            pairs: 24,
            seed: 11,
            initial_action: 0.0,
            separation: 1e-8,
        };
        let run = |w| rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(|| pair_ensemble(&cfg).unwrap());
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn jacobian_has_unit_determinant(action in -5.0..5.0f64, angle in 0.0..TWO_PI, r in -3.0..3.0f64, dt in 1e-3..2.0f64) {
            let det = step_jacobian(ClassicalState::new(action, angle), r, dt).determinant();
            prop_assert!((det - 1.0).abs() < 1e-12);
        }

        #[test]
        fn tangent_step_is_the_jacobian(action in -5.0..5.0f64, angle in 0.0..TWO_PI, r in -3.0..3.0f64, dt in 1e-3..2.0f64, ua in -1.0..1.0f64, ut in -1.0..1.0f64) {
            let s = ClassicalState::new(action, angle);
            let u = step_tangent(TangentVector { u_action: ua, u_angle: ut }, s, r, dt);
            let j = step_jacobian(s, r, dt) * nalgebra::Vector2::new(ua, ut);
            prop_assert!((u.u_action - j[0]).abs() < 1e-12 && (u.u_angle - j[1]).abs() < 1e-12);
        }

        #[test]
        fn zero_kick_conserves_action(action in -50.0..50.0f64, angle in 0.0..TWO_PI, dt in 1e-3..10.0f64) {
            prop_assert_eq!(step_map(ClassicalState::new(action, angle), 0.0, dt).action, action);
        }

        #[test]
        fn moment_growth_is_twice_closed_form(eps in 1e-12..1e2f64, h in 1e-3..1e2f64, q in 1e-2..10.0f64) {
            let ev = moment_growth(eps, h, q);
            let cf = 2.0 * classical_lyapunov_prediction(eps, h, q);
            prop_assert!(((ev - cf) / cf).abs() < 1e-9);
        }

        #[test]
        fn cos_separation_is_bounded(a in -1.0..1.0f64, b in 0.0..TWO_PI, seed in 0u64..1000) {
            let kicks = generate_kicks_raw(seed, 0, 0.5, 0.3, 200).amplitudes;
            let tr = evolve_pair(ClassicalState::new(a, b), ClassicalState::new(-a, b + 1.0), &kicks, 0.3, &[0, 50, 200]).unwrap();
            prop_assert!(tr.u_cos.iter().all(|u| u.abs() <= 2.0));
        }
    }
}
