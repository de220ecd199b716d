//! Growth-rate fits, log-log scaling, the prescrambling trend and the
//! canonical-ensemble scrambling product `g = k λ̃_Q(n_T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{level_energy, quantum_lyapunov_rate, weak_ratio_at, LyapunovConvention};

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 paired points, got {} and {}", x.len(), y.len())));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("x values are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(LinearFit { slope, intercept, slope_stderr, r_squared })
}

/// Outcome of [`fit_lyapunov`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted rate `λ̂`, with `C² ∝ e^{2λ̂t}`; absent unless a regime is found.
    pub lambda_hat: Option<f64>,
    /// Last iterate of the rate, kept for diagnostics even without a regime.
    pub last_rate: f64,
    pub window: Option<(f64, f64)>,
    pub r_squared: f64,
    pub plateau_level: f64,
    /// First time the series exceeds half the plateau.
    pub prescrambling_time: f64,
    /// Time at which the fitted exponential equals the initial value.
    pub onset_time: Option<f64>,
    pub iterations: usize,
    pub regime_found: bool,
    pub diagnostics: String,
}

/// Fraction of the plateau that marks the prescrambling time.
pub const PLATEAU_FRACTION: f64 = 0.5;
/// Minimum `r²` of an exponential window.
pub const MIN_R_SQUARED: f64 = 0.98;
/// Minimum window length in units of `1/λ̂`.
pub const MIN_EFOLDS: f64 = 2.0;

/// Fits the exponential window `[1/λ̂, t_E]` of a positive series, with
/// `λ̂` half the slope of `ln C²` over that window, iterated from
/// `lambda_guess` to a fixed point.
pub fn fit_lyapunov(times: &[f64], series: &[f64], lambda_guess: f64) -> Result<FitResult> {
    if times.len() != series.len() || times.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 paired samples".into()));
    }
    if series.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidInput("series must be strictly positive and finite".into()));
    }
    if !(lambda_guess > 0.0) {
        return Err(Error::InvalidInput(format!("lambda guess must be positive, got {lambda_guess}")));
    }
    let tail = (series.len() / 10).max(1);
    let plateau_level = median(&series[series.len() - tail..]);
    let threshold = PLATEAU_FRACTION * plateau_level;
    let t_e_idx = series.iter().position(|&c| c > threshold).unwrap_or(series.len() - 1);
    let prescrambling_time = times[t_e_idx];
    let logs: Vec<f64> = series.iter().map(|c| c.ln()).collect();

    let mut out = FitResult {
        lambda_hat: None,
        last_rate: lambda_guess,
        window: None,
        r_squared: 0.0,
        plateau_level,
        prescrambling_time,
        onset_time: None,
        iterations: 0,
        regime_found: false,
        diagnostics: String::new(),
    };
    let mut lambda = lambda_guess;
    let mut converged = false;
    let mut last: Option<LinearFit> = None;
    for it in 1..=10 {
        out.iterations = it;
        let start = 1.0 / lambda;
        let (x, y): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&logs)
            .take(t_e_idx + 1)
            .filter(|(t, _)| **t >= start)
            .map(|(t, l)| (*t, *l))
            .unzip();
        if x.len() < 3 {
            out.diagnostics = format!("window [{start:.4e}, {prescrambling_time:.4e}] holds {} samples", x.len());
            break;
        }
        let fit = linear_fit(&x, &y)?;
        let next = fit.slope / 2.0;
        last = Some(fit);
        if !(next > 0.0) {
            out.diagnostics = format!("non-positive slope {:.4e}", fit.slope);
            break;
        }
        let change = ((next - lambda) / lambda).abs();
        lambda = next;
        out.last_rate = lambda;
        if change < 0.01 {
            converged = true;
            break;
        }
    }
    if let Some(fit) = last {
        out.r_squared = fit.r_squared;
        if fit.slope > 0.0 {
            out.onset_time = Some(-fit.intercept / fit.slope);
        }
    }
    let start = 1.0 / lambda;
    if start < prescrambling_time {
        out.window = Some((start, prescrambling_time));
    }
    if !converged {
        if out.diagnostics.is_empty() {
            out.diagnostics = "rate iteration did not converge in 10 steps".into();
        }
        return Ok(out);
    }
    let long_enough = prescrambling_time - start > MIN_EFOLDS / lambda;
    out.regime_found = long_enough && out.r_squared > MIN_R_SQUARED;
    if out.regime_found {
        out.lambda_hat = Some(lambda);
    } else {
        out.diagnostics = format!(
            "window length {:.3} / lambda, r^2 = {:.4}",
            (prescrambling_time - start) * lambda,
            out.r_squared
        );
    }
    Ok(out)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Power-law fit `y ∝ x^slope` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    /// `ln` of the prefactor.
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::InvalidInput("all points must be positive".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("x values must be distinct".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let f = linear_fit(&x, &y)?;
    Ok(ScalingFit { slope: f.slope, stderr: f.slope_stderr, intercept: f.intercept, r_squared: f.r_squared })
}

/// Linear trend of `λ̂ t_E` against `ln n₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescramblingTrend {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used: Vec<f64>,
    /// `n₀` values whose fit found no Lyapunov regime.
    pub excluded: Vec<f64>,
}

pub fn prescrambling_vs_n0(fits: &[(f64, FitResult)]) -> Result<PrescramblingTrend> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (n0, fit) in fits {
        match (fit.regime_found, fit.lambda_hat) {
            (true, Some(l)) => {
                used.push(*n0);
                x.push(n0.ln());
                y.push(l * fit.prescrambling_time);
            }
            _ => excluded.push(*n0),
        }
    }
    if used.len() < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 fits with a regime, got {}", used.len())));
    }
    let f = linear_fit(&x, &y)?;
    Ok(PrescramblingTrend { slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, used, excluded })
}

/// Canonical-ensemble point at dimensionless inverse temperature `k = βħω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub beta_hbar_omega0: f64,
    pub n_t: f64,
    pub lambda_t_adim: f64,
    pub g: f64,
    pub weak_ratio: f64,
    /// `n_T < 1`: no Lyapunov regime is expected.
    pub no_regime: bool,
    /// `weak_ratio < 0.1` and a regime is expected.
    pub bound_relevant: bool,
}

/// Most levels summed before the thermal series is declared unconverged.
pub const MAX_THERMAL_TERMS: u64 = 50_000_000;

/// `n_T(k) = Σ n e^{−k n^γ} / Σ e^{−k n^γ}` over `n ≥ 0`, summed until the
/// Boltzmann weight drops below `1e-16`.
pub fn thermal_level(gamma: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!("need k > 0 and gamma > 0, got k = {k}, gamma = {gamma}")));
    }
    let (mut z, mut s) = (0.0, 0.0);
    for n in 0..MAX_THERMAL_TERMS {
        let w = (-k * level_energy(gamma, n as i64)).exp();
        if w < 1e-16 {
            return Ok(s / z);
        }
        z += w;
        s += n as f64 * w;
    }
    Err(Error::TruncationNotConverged(format!("k = {k} needs more than {MAX_THERMAL_TERMS} levels")))
}

/// Inverse temperature `k` at which the thermal level equals `n_t`.
pub fn thermal_inverse(gamma: f64, n_t: f64) -> Result<f64> {
    if !(n_t > 0.0) {
        return Err(Error::Domain(format!("thermal level must be positive, got {n_t}")));
    }
    // n_T decreases in k: bracket, then bisect in ln k.
    let (mut lo, mut hi) = (1e-3, 1.0);
    while thermal_level(gamma, lo)? < n_t {
        lo *= 0.1;
        if lo < 1e-12 {
            return Err(Error::Domain(format!("thermal level {n_t} is out of reach")));
        }
    }
    while thermal_level(gamma, hi)? > n_t {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if thermal_level(gamma, mid)? > n_t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// `g = k λ̃_Q(n_T(k), ε̃)` over a grid of `k`.
pub fn thermal_bound_curve(gamma: f64, mu: f64, eps_tilde: f64, k_grid: &[f64]) -> Result<Vec<ThermalPoint>> {
    k_grid
        .iter()
        .map(|&k| {
            let n_t = thermal_level(gamma, k)?;
            let lambda = quantum_lyapunov_rate(gamma, mu, eps_tilde, n_t, LyapunovConvention::MomentClosure);
            let weak_ratio = weak_ratio_at(gamma, mu, eps_tilde, n_t);
            let no_regime = n_t < 1.0;
            Ok(ThermalPoint {
                beta_hbar_omega0: k,
                n_t,
                lambda_t_adim: lambda,
                g: k * lambda,
                weak_ratio,
                no_regime,
                bound_relevant: weak_ratio < 0.1 && !no_regime,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn capped(rate: f64, cap: f64, t_max: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
        let c = t.iter().map(|&t| (2.0 * rate * t).exp().min(cap)).collect();
        (t, c)
    }

    #[test]
    fn synthetic_exponential() {
        let (t, c) = capped(0.1, 1e6, 100.0, 1001);
        let f = fit_lyapunov(&t, &c, 0.07).unwrap();
        assert!(f.regime_found, "{}", f.diagnostics);
        assert!((f.lambda_hat.unwrap() - 0.1).abs() < 0.002);
        assert!(f.onset_time.unwrap().abs() < 0.1);
        assert_eq!(f.plateau_level, 1e6);
    }

    #[test]
    fn constant_series_has_no_regime() {
        let t: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let f = fit_lyapunov(&t, &[3.0; 100], 0.5).unwrap();
        assert!(!f.regime_found);
        assert!(f.lambda_hat.is_none());
    }

    #[test]
    fn short_window_has_no_regime() {
        // Saturates after 2.5 e-folds of the amplitude, well before 1/λ + 2/λ.
        let (t, c) = capped(1.0, (2.0f64 * 1.5).exp(), 20.0, 401);
        let f = fit_lyapunov(&t, &c, 1.0).unwrap();
        assert!(!f.regime_found);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_lyapunov(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], 1.0).is_err());
        assert!(fit_lyapunov(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| {
            let x = 10f64.powi(i);
            (x, x.cbrt())
        }).collect();
        let s = scaling_exponent(&pts).unwrap();
        assert!((s.slope - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_law() {
        let d = [0.03, -0.03, 0.02, -0.01, 0.03, -0.02];
        let pts: Vec<(f64, f64)> = (0..6).map(|i| {
            let x = 10f64.powi(i);
            (x, 2.5 * x.cbrt() * (1.0 + d[i as usize]))
        }).collect();
        let s = scaling_exponent(&pts).unwrap();
        assert!((0.31..=0.36).contains(&s.slope));
    }

    #[test]
    fn scaling_errors() {
        assert!(scaling_exponent(&[(1.0, 1.0), (1.0, 2.0), (3.0, 3.0)]).is_err());
        assert!(scaling_exponent(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(scaling_exponent(&[(1.0, 1.0), (2.0, -2.0), (3.0, 3.0)]).is_err());
    }

    fn found(lambda: f64, t_e: f64) -> FitResult {
        FitResult {
            lambda_hat: Some(lambda),
            last_rate: lambda,
            window: Some((1.0 / lambda, t_e)),
            r_squared: 0.99,
            plateau_level: 1.0,
            prescrambling_time: t_e,
            onset_time: None,
            iterations: 1,
            regime_found: true,
            diagnostics: String::new(),
        }
    }

    #[test]
    fn prescrambling_recovers_line() {
        let mut fits: Vec<(f64, FitResult)> = [256.0f64, 512.0, 1024.0, 2048.0]
            .iter()
            .map(|&n| (n, found(2.0, (1.5 + 0.7 * n.ln()) / 2.0)))
            .collect();
        let mut absent = found(1.0, 1.0);
        absent.regime_found = false;
        absent.lambda_hat = None;
        fits.push((16.0, absent));
        let t = prescrambling_vs_n0(&fits).unwrap();
        assert_relative_eq!(t.slope, 0.7, max_relative = 1e-10);
        assert_relative_eq!(t.intercept, 1.5, max_relative = 1e-10);
        assert_eq!(t.excluded, vec![16.0]);
        assert!(prescrambling_vs_n0(&fits[1..]).is_err());
    }

    #[test]
    fn linear_spectrum_is_bose() {
        assert_relative_eq!(thermal_level(1.0, 2f64.ln()).unwrap(), 1.0, max_relative = 1e-12);
        for i in 0..=40 {
            let k = 0.1 * 100f64.powf(i as f64 / 40.0);
            let bose = 1.0 / (k.exp() - 1.0);
            assert!((thermal_level(1.0, k).unwrap() - bose).abs() <= 1e-10 * bose.max(1.0));
        }
    }

    #[test]
    fn thermal_limits_and_inverse() {
        assert!(thermal_level(2.0, 50.0).unwrap() < 1e-20);
        let k = thermal_inverse(2.0, 10.0).unwrap();
        assert_relative_eq!(thermal_level(2.0, k).unwrap(), 10.0, max_relative = 1e-10);
        assert!(thermal_level(1.0, 0.0).is_err());
    }

    #[test]
    fn thermal_curve_structure() {
        let ks: Vec<f64> = (1..40).map(|i| 1e-4 * 1.3f64.powi(i)).collect();
        let pts = thermal_bound_curve(2.0, 0.0, 1.0, &ks).unwrap();
        for p in &pts {
            assert_relative_eq!(p.g, p.beta_hbar_omega0 * 2f64.cbrt(), max_relative = 1e-12);
            assert_eq!(p.no_regime, p.n_t < 1.0);
            assert!(p.g >= 0.0);
        }
        // g grows as n_T falls towards 1.
        let above: Vec<&ThermalPoint> = pts.iter().filter(|p| p.n_t >= 1.0).collect();
        assert!(above.windows(2).all(|w| w[1].g > w[0].g));
    }

    proptest! {
        #[test]
        fn thermal_level_decreases(gamma in 0.5..2.0f64, k in 0.01..5.0f64, dk in 1e-3..1.0f64) {
            let a = thermal_level(gamma, k).unwrap();
            let b = thermal_level(gamma, k + dk).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn fit_is_scale_invariant(scale in 1e-6..1e6f64, rate in 0.05..2.0f64) {
            let (t, c) = capped(rate, 1e7, 14.0 / rate, 600);
            let s: Vec<f64> = c.iter().map(|x| x * scale).collect();
            let a = fit_lyapunov(&t, &c, rate * 0.8).unwrap();
            let b = fit_lyapunov(&t, &s, rate * 0.8).unwrap();
            prop_assert_eq!(a.regime_found, b.regime_found);
            prop_assert!((a.last_rate - b.last_rate).abs() <= 1e-9 * a.last_rate);
            prop_assert!((b.plateau_level / a.plateau_level / scale - 1.0).abs() < 1e-12);
        }

        #[test]
        fn power_law_exponent_is_exact(p in -3.0..3.0f64, c in 0.01..100.0f64) {
            let pts: Vec<(f64, f64)> = (0..5).map(|i| {
                let x = 3f64.powi(i);
                (x, c * x.powf(p))
            }).collect();
            prop_assert!((scaling_exponent(&pts).unwrap().slope - p).abs() < 1e-12);
        }
    }
}
