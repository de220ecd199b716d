//! Experiment configuration: a JSON document, validated and resolved
//! before anything runs.

use std::path::PathBuf;

use quasichaos::model::{quantum_lyapunov_rate, ModelSpec};
use quasichaos::{Lattice, LyapunovConvention};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ClassicalPair,
    ClassicalMoments,
    QuantumOtoc,
    Superop,
    ThermalBound,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ClassicalPair => "classical-pair",
            Mode::ClassicalMoments => "classical-moments",
            Mode::QuantumOtoc => "quantum-otoc",
            Mode::Superop => "superop",
            Mode::ThermalBound => "thermal-bound",
            Mode::Sweep => "sweep",
        }
    }
}

/// Quantum model; `tau` defaults to a fraction of the predicted Lyapunov
/// time (see [`ScheduleConfig::kick_fraction`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub gamma: f64,
    #[serde(default)]
    pub mu: f64,
    pub eps_tilde: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub lattice: Lattice,
    pub n0: i64,
}

/// Run length and sampling of the quantum modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Total kicks. Derived from `lyapunov_times` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Run length in predicted Lyapunov times.
    pub lyapunov_times: f64,
    /// Default kick period as a fraction of the Lyapunov time.
    pub kick_fraction: f64,
    pub geometric: usize,
    pub linear: usize,
    /// Fit only the first this many predicted (moment-closure) Lyapunov
    /// times.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_lyapunov_times: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: None,
            lyapunov_times: 5.5,
            kick_fraction: 0.01,
            geometric: 20,
            linear: 60,
            fit_lyapunov_times: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitTarget {
    /// `exp⟨ln C²⟩`.
    #[default]
    Quenched,
    /// `⟨C²⟩`.
    Annealed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumConfig {
    pub fit_on: FitTarget,
    /// Convention of the rate used for the time axis and the fit guess.
    pub convention: LyapunovConvention,
    /// Emit level histograms of the wavefunction and the cosΘ column.
    pub histograms: bool,
    /// Emit `|C²_{n₀, n₀+offset}|` for this offset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_diagonal_offset: Option<i64>,
    /// Also write every realization's `C²`.
    pub per_realization: bool,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        QuantumConfig {
            fit_on: FitTarget::Quenched,
            convention: LyapunovConvention::MomentClosure,
            histograms: false,
            off_diagonal_offset: None,
            per_realization: false,
        }
    }
}

/// Classical rotor `H = I²/2` with noise strengths `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub eps: Vec<f64>,
    pub initial_action: f64,
    pub separation: f64,
    /// Run length in predicted Lyapunov times.
    pub lyapunov_times: f64,
    /// Kick period as a fraction of the Lyapunov time.
    pub dt_fraction: f64,
    pub samples: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            eps: vec![1e-4, 1e-6, 1e-8, 1e-10, 1e-12],
            initial_action: 1.0,
            separation: 1e-9,
            lyapunov_times: 40.0,
            dt_fraction: 0.02,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperopConfig {
    pub band: usize,
    pub window: usize,
    /// `dt = dt_fraction / max(|j|, λ)`.
    pub dt_fraction: f64,
    pub record_every: usize,
}

impl Default for SuperopConfig {
    fn default() -> Self {
        SuperopConfig { band: 32, window: 64, dt_fraction: 0.02, record_every: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    /// Values of `βħω₀`.
    pub k_grid: Vec<f64>,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig { k_grid: (0..25).map(|i| 10f64.powf(-2.0 + i as f64 / 8.0)).collect() }
    }
}

/// Sweep axes. Points are `n0 × strengths`; with no strength axis the
/// model's `eps_tilde` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps_tilde: Vec<f64>,
    /// `ε̃ = f · n₀^γ`.
    pub eps_tilde_over_n0_gamma: Vec<f64>,
    /// `ε̃ = (s · n₀)²`.
    pub sqrt_eps_over_n0: Vec<f64>,
    pub n0: Vec<i64>,
    /// Half-line of size `(2(n₀+1))` rounded up to a power of two.
    pub lattice_from_n0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Prefix of the output file names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub model: ModelConfig,
    pub seed: u64,
    pub realizations: usize,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub quantum: QuantumConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub superop: SuperopConfig,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// A quantum run after defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedQuantum {
    pub spec: ModelSpec,
    pub steps: usize,
    pub schedule: Vec<usize>,
    /// Predicted rate in the configured convention (0 if none).
    pub rate: f64,
    /// Moment-closure rate, which sets `tau` and the run length.
    pub closure_rate: f64,
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            label: None,
            model: ModelConfig {
                gamma: 2.0,
                mu: 0.0,
                eps_tilde: 1e4,
                tau: None,
                lattice: Lattice::HalfLine { size: 1024 },
                n0: 512,
            },
            seed: 1,
            realizations: 16,
            schedule: ScheduleConfig::default(),
            quantum: QuantumConfig::default(),
            classical: ClassicalConfig::default(),
            superop: SuperopConfig::default(),
            thermal: ThermalConfig::default(),
            sweep: SweepConfig::default(),
            output: PathBuf::from("out"),
            workers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn file_name(&self, stem: &str) -> String {
        match &self.label {
            Some(l) => format!("{l}_{stem}"),
            None => stem.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let s = &self.schedule;
        if !(s.lyapunov_times > 0.0) || !(s.kick_fraction > 0.0) {
            return bad("schedule.lyapunov_times and schedule.kick_fraction must be positive".into());
        }
        if s.geometric + s.linear == 0 {
            return bad("schedule needs at least one sample".into());
        }
        if s.fit_lyapunov_times.is_some_and(|h| !(h > 0.0)) {
            return bad("schedule.fit_lyapunov_times must be positive".into());
        }
        let c = &self.classical;
        if c.eps.is_empty() || c.eps.iter().any(|e| !(*e >= 0.0)) {
            return bad("classical.eps needs non-negative values".into());
        }
        if !(c.separation > 0.0) || !(c.lyapunov_times > 0.0) || !(c.dt_fraction > 0.0) || c.samples < 2 {
            return bad("classical separation, lyapunov_times, dt_fraction must be positive and samples >= 2".into());
        }
        if self.superop.band == 0 || self.superop.window == 0 || self.superop.record_every == 0 {
            return bad("superop band, window and record_every must be at least 1".into());
        }
        if !(self.superop.dt_fraction > 0.0) {
            return bad("superop.dt_fraction must be positive".into());
        }
        if self.thermal.k_grid.is_empty() || self.thermal.k_grid.iter().any(|k| !(*k > 0.0)) {
            return bad("thermal.k_grid needs positive values".into());
        }
        let w = &self.sweep;
        if w.eps_tilde.iter().chain(&w.eps_tilde_over_n0_gamma).chain(&w.sqrt_eps_over_n0).any(|e| !(*e >= 0.0)) {
            return bad("sweep strengths must be non-negative".into());
        }
        match self.mode {
            Mode::QuantumOtoc | Mode::Superop => {
                self.resolve_quantum(self.model.eps_tilde, self.model.n0, self.model.lattice)?;
            }
            Mode::Sweep => {
                for p in self.sweep_points() {
                    self.resolve_quantum(p.eps_tilde, p.n0, p.lattice)?;
                }
            }
            Mode::ThermalBound => {
                if !(self.model.eps_tilde >= 0.0) {
                    return bad("model.eps_tilde must be non-negative".into());
                }
            }
            Mode::ClassicalPair | Mode::ClassicalMoments => {}
        }
        Ok(())
    }

    /// Fills in `tau` and the run length for one model point.
    pub fn resolve_quantum(&self, eps_tilde: f64, n0: i64, lattice: Lattice) -> Result<ResolvedQuantum, CliError> {
        let m = &self.model;
        let closure = quantum_lyapunov_rate(m.gamma, m.mu, eps_tilde, n0 as f64, LyapunovConvention::MomentClosure);
        let closure = if m.gamma == 1.0 || !closure.is_finite() { 0.0 } else { closure };
        let tau = match m.tau {
            Some(t) => t,
            None if closure > 0.0 => self.schedule.kick_fraction / closure,
            None => {
                return Err(CliError::Config(
                    "no Lyapunov growth is predicted for this model: give model.tau explicitly".into(),
                ))
            }
        };
        let spec = ModelSpec::new(m.gamma, m.mu, eps_tilde, tau, lattice, n0).map_err(|e| CliError::Config(e.to_string()))?;
        let steps = match self.schedule.steps {
            Some(s) => s,
            None if closure > 0.0 => (self.schedule.lyapunov_times / closure / tau).ceil() as usize,
            None => return Err(CliError::Config("no Lyapunov time to size the run: give schedule.steps".into())),
        };
        if steps == 0 {
            return Err(CliError::Config("the run needs at least one step".into()));
        }
        let schedule = quasichaos::quantum::geometric_linear_schedule(steps, self.schedule.geometric, self.schedule.linear);
        let rate = if closure > 0.0 {
            quantum_lyapunov_rate(m.gamma, m.mu, eps_tilde, n0 as f64, self.quantum.convention)
        } else {
            0.0
        };
        Ok(ResolvedQuantum { spec, steps, schedule, rate, closure_rate: closure })
    }

    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let w = &self.sweep;
        let n0s = if w.n0.is_empty() { vec![self.model.n0] } else { w.n0.clone() };
        let mut out = Vec::new();
        for &n0 in &n0s {
            let lattice = if w.lattice_from_n0 {
                Lattice::HalfLine { size: (2 * (n0.max(0) as usize + 1)).next_power_of_two() }
            } else {
                self.model.lattice
            };
            let mut strengths: Vec<f64> = w.eps_tilde.clone();
            strengths.extend(w.eps_tilde_over_n0_gamma.iter().map(|f| f * (n0 as f64).abs().powf(self.model.gamma)));
            strengths.extend(w.sqrt_eps_over_n0.iter().map(|s| (s * n0 as f64).powi(2)));
            if strengths.is_empty() {
                strengths.push(self.model.eps_tilde);
            }
            out.extend(strengths.into_iter().map(|eps_tilde| SweepPoint { n0, eps_tilde, lattice }));
        }
        out
    }

    /// Fills every derived default so that the written config reruns the
    /// same experiment without relying on defaults.
    pub fn resolved(&self) -> Result<Self, CliError> {
        self.validate()?;
        let mut c = self.clone();
        c.workers = Some(self.workers.unwrap_or_else(default_workers));
        if matches!(self.mode, Mode::QuantumOtoc | Mode::Superop) {
            let r = self.resolve_quantum(self.model.eps_tilde, self.model.n0, self.model.lattice)?;
            c.model.tau = Some(r.spec.tau);
            c.schedule.steps = Some(r.steps);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n0: i64,
    pub eps_tilde: f64,
    pub lattice: Lattice,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for mode in [Mode::ClassicalPair, Mode::QuantumOtoc, Mode::Sweep, Mode::ThermalBound] {
            let mut c = ExperimentConfig::defaults(mode);
            c.label = Some("x".into());
            c.quantum.off_diagonal_offset = Some(10);
            c.sweep.n0 = vec![255, 511];
            let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::defaults(Mode::Superop).to_json()).unwrap();
        v["model"]["epsilon"] = 1.0.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::defaults(Mode::Superop).to_json()).unwrap();
        v["colour"] = "blue".into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn tau_defaults_to_a_fraction_of_the_lyapunov_time() {
        let c = ExperimentConfig::defaults(Mode::QuantumOtoc);
        let r = c.resolve_quantum(1e4, 512, c.model.lattice).unwrap();
        assert!((r.spec.tau * r.rate - 0.01).abs() < 1e-12);
        assert_eq!(r.steps, 550);
        let resolved = c.resolved().unwrap();
        assert_eq!(resolved.model.tau, Some(r.spec.tau));
        assert_eq!(resolved.schedule.steps, Some(550));
    }

    #[test]
    fn no_growth_needs_explicit_tau() {
        let mut c = ExperimentConfig::defaults(Mode::QuantumOtoc);
        c.model.eps_tilde = 0.0;
        assert!(c.validate().is_err());
        c.model.tau = Some(0.01);
        assert!(c.validate().is_err());
        c.schedule.steps = Some(10);
        c.validate().unwrap();
    }

    #[test]
    fn sweep_points_cover_all_axes() {
        let mut c = ExperimentConfig::defaults(Mode::Sweep);
        c.sweep.n0 = vec![255, 8191];
        c.sweep.sqrt_eps_over_n0 = vec![5e-3];
        c.sweep.eps_tilde = vec![7.0];
        c.sweep.lattice_from_n0 = true;
        let p = c.sweep_points();
        assert_eq!(p.len(), 4);
        assert_eq!(p[1].eps_tilde, (5e-3f64 * 255.0).powi(2));
        assert_eq!(p[3].lattice, Lattice::HalfLine { size: 16384 });
        assert_eq!(p[0].lattice, Lattice::HalfLine { size: 512 });
    }
}
