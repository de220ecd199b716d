//! The adimensional model family `H = N^γ + ε̃^{1/2} η(t) q(N, Θ)`, its
//! spectrum, the kick train realizing the white noise, and the closed-form
//! rates and regime criteria.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite set of levels the quantum state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Lattice {
    /// Levels `0..size`.
    HalfLine { size: usize },
    /// Levels `-size/2 .. size/2`.
    Symmetric { size: usize },
}

impl Lattice {
    pub fn size(&self) -> usize {
        match *self {
            Lattice::HalfLine { size } | Lattice::Symmetric { size } => size,
        }
    }

    pub fn first_level(&self) -> i64 {
        match *self {
            Lattice::HalfLine { .. } => 0,
            Lattice::Symmetric { size } => -((size / 2) as i64),
        }
    }

    pub fn last_level(&self) -> i64 {
        self.first_level() + self.size() as i64 - 1
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.first_level() && n <= self.last_level()
    }

    pub fn index_of(&self, n: i64) -> Result<usize> {
        if self.contains(n) {
            Ok((n - self.first_level()) as usize)
        } else {
            Err(Error::LevelOutOfRange { level: n, first: self.first_level(), last: self.last_level() })
        }
    }

    pub fn level(&self, index: usize) -> i64 {
        self.first_level() + index as i64
    }

    /// Number of levels between `n` and the nearest edge (0 on the edge).
    pub fn edge_distance(&self, n: i64) -> i64 {
        (n - self.first_level()).min(self.last_level() - n)
    }

    pub fn levels(&self) -> impl Iterator<Item = i64> {
        self.first_level()..=self.last_level()
    }
}

/// Energy `|n|^γ` of level `n`.
#[inline]
pub fn level_energy(gamma: f64, n: i64) -> f64 {
    let a = n.unsigned_abs() as f64;
    if gamma == 2.0 {
        a * a
    } else if gamma == 1.0 {
        a
    } else {
        a.powf(gamma)
    }
}

/// Torus frequency `ω_n = E_n − E_{n−1}`.
#[inline]
pub fn torus_frequency(gamma: f64, n: i64) -> f64 {
    level_energy(gamma, n) - level_energy(gamma, n - 1)
}

/// Local curvature `γ(γ−1) n^{γ−2}` of the spectrum.
#[inline]
pub fn spectrum_curvature(gamma: f64, n: f64) -> f64 {
    gamma * (gamma - 1.0) * n.abs().powf(gamma - 2.0)
}

/// The adimensional model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Spectrum exponent, `0 < γ ≤ 2`.
    pub gamma: f64,
    /// Exponent of the level dependence `V(n) = n^μ` of the perturbation.
    pub mu: f64,
    /// Adimensional noise variance.
    pub eps_tilde: f64,
    /// Kick period.
    pub tau: f64,
    pub lattice: Lattice,
    /// Initial level.
    pub n0: i64,
}

impl ModelSpec {
    pub fn new(gamma: f64, mu: f64, eps_tilde: f64, tau: f64, lattice: Lattice, n0: i64) -> Result<Self> {
        let spec = ModelSpec { gamma, mu, eps_tilde, tau, lattice, n0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Model with `μ = 0` and the kick period tied to the predicted Lyapunov
    /// time, `τ = fraction / λ̃_Q` (falls back to `fraction` when there is no
    /// predicted growth).
    pub fn with_lyapunov_tau(gamma: f64, eps_tilde: f64, lattice: Lattice, n0: i64, fraction: f64) -> Result<Self> {
        let rate = quantum_lyapunov_rate(gamma, 0.0, eps_tilde, n0 as f64, LyapunovConvention::MomentClosure);
        let tau = if rate > 0.0 { fraction / rate } else { fraction };
        ModelSpec::new(gamma, 0.0, eps_tilde, tau, lattice, n0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return bad(format!("gamma must lie in (0, 2], got {}", self.gamma));
        }
        if !self.mu.is_finite() {
            return bad(format!("mu must be finite, got {}", self.mu));
        }
        if !(self.eps_tilde >= 0.0) || !self.eps_tilde.is_finite() {
            return bad(format!("eps_tilde must be finite and >= 0, got {}", self.eps_tilde));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("tau must be finite and > 0, got {}", self.tau));
        }
        if self.lattice.size() < 4 {
            return bad(format!("lattice needs at least 4 levels, got {}", self.lattice.size()));
        }
        if self.gamma != 2.0 && matches!(self.lattice, Lattice::Symmetric { .. }) {
            return bad("only gamma = 2 may use the symmetric lattice".into());
        }
        if self.lattice.edge_distance(self.n0) < 1 {
            return bad(format!(
                "n0 = {} must lie strictly inside [{}, {}]",
                self.n0,
                self.lattice.first_level(),
                self.lattice.last_level()
            ));
        }
        Ok(())
    }

    /// `q̄²` of the perturbation `V(N) cosΘ + cosΘ V(N)` at level `n`.
    pub fn qbar_squared(&self, n: f64) -> f64 {
        2.0 * n.abs().powf(2.0 * self.mu)
    }

    /// Rough width in levels reached by energy diffusion after time `t`,
    /// four standard deviations of a walk with variance rate `ε̃ q̄²`.
    pub fn expected_spread(&self, t: f64) -> f64 {
        4.0 * (self.eps_tilde * self.qbar_squared(self.n0 as f64) * t).sqrt()
    }

    /// Checks that `n0` keeps a margin of `expected_spread(t) + support`
    /// levels to both edges.
    pub fn check_edge_margin(&self, t: f64, support: usize) -> Result<()> {
        let need = self.expected_spread(t) + support as f64;
        let have = self.lattice.edge_distance(self.n0) as f64;
        if have > need {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "n0 is {have} levels from the edge, needs more than {need:.1} for t = {t}"
            )))
        }
    }
}

/// Dimensionful parameters of a particle in the potential `α q^ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalUnits {
    pub mass: f64,
    /// Potential strength `α`. For the infinite well (`power = ∞`) this is
    /// the well width `L`, the scale left over from `α^{1/ν} → 1/L`.
    pub strength: f64,
    /// Potential power `ν`; `f64::INFINITY` is the infinite well.
    pub power: f64,
    pub hbar: f64,
    /// Dimensional noise variance `ε`.
    pub noise_variance: f64,
}

/// Output of [`derive_adimensional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adimensional {
    pub omega0: f64,
    pub eps_tilde: f64,
    pub gamma: f64,
    pub mu: f64,
}

/// Exponents of (mass, length, time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimension {
    pub mass: f64,
    pub length: f64,
    pub time: f64,
}

impl Dimension {
    pub const NONE: Dimension = Dimension { mass: 0.0, length: 0.0, time: 0.0 };
    pub const ENERGY: Dimension = Dimension { mass: 1.0, length: 2.0, time: -2.0 };

    pub fn pow(self, p: f64) -> Dimension {
        if p == 0.0 {
            return Dimension::NONE;
        }
        Dimension { mass: self.mass * p, length: self.length * p, time: self.time * p }
    }

    pub fn mul(self, o: Dimension) -> Dimension {
        Dimension { mass: self.mass + o.mass, length: self.length + o.length, time: self.time + o.time }
    }

    pub fn approx_eq(self, o: Dimension, tol: f64) -> bool {
        (self.mass - o.mass).abs() < tol && (self.length - o.length).abs() < tol && (self.time - o.time).abs() < tol
    }
}

/// Dimensions of `(m, α, ħ, ε)` for potential power `ν`. For the infinite
/// well the strength slot holds the well width.
pub fn unit_dimensions(power: f64) -> [Dimension; 4] {
    let length = Dimension { mass: 0.0, length: 1.0, time: 0.0 };
    let time = Dimension { mass: 0.0, length: 0.0, time: 1.0 };
    let mass = Dimension { mass: 1.0, length: 0.0, time: 0.0 };
    let strength = if power.is_finite() { Dimension::ENERGY.mul(length.pow(-power)) } else { length };
    let hbar = Dimension::ENERGY.mul(time);
    let noise = Dimension::ENERGY.pow(2.0).mul(time).mul(length.pow(-2.0));
    [mass, strength, hbar, noise]
}

/// `α^a` with `a = c/(2+ν)`, and its dimension. As `ν → ∞` with
/// `α^{1/ν} → 1/L` this tends to `L^{−c}`.
fn strength_power(strength: f64, power: f64, c: f64, dim: Dimension) -> (f64, Dimension) {
    if power.is_finite() {
        let a = c / (2.0 + power);
        (strength.powf(a), dim.pow(a))
    } else {
        (strength.powf(-c), dim.pow(-c))
    }
}

/// Rescales the dimensionful model into `(ω₀, ε̃, γ, μ)`.
pub fn derive_adimensional(units: &PhysicalUnits) -> Result<Adimensional> {
    let PhysicalUnits { mass, strength, power, hbar, noise_variance } = *units;
    for (name, v) in [("mass", mass), ("strength", strength), ("power", power), ("hbar", hbar), ("noise_variance", noise_variance)] {
        if !(v > 0.0) || v.is_nan() {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
        if name != "power" && !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    let gamma = 2.0 / (2.0 / power + 1.0);
    let mu = (2.0 - gamma) / 2.0;
    let [dm, da, dh, de] = unit_dimensions(power);

    // α^{1−γ/2} and α^{2−γ}, i.e. c = 2 and c = 4.
    let (a_omega, a_omega_dim) = strength_power(strength, power, 2.0, da);
    let (a_eps, a_eps_dim) = strength_power(strength, power, 4.0, da);
    let (m_omega, h_omega) = (-gamma / 2.0, gamma - 1.0);
    let (m_eps, h_eps) = (1.0 - gamma, 2.0 * gamma - 1.0);
    let omega0 = a_omega * mass.powf(m_omega) * hbar.powf(h_omega);
    let eps_tilde = noise_variance / (mass.powf(m_eps) * a_eps * hbar.powf(h_eps));

    let omega_dim = a_omega_dim.mul(dm.pow(m_omega)).mul(dh.pow(h_omega));
    let eps_dim = de.mul(dm.pow(m_eps).mul(a_eps_dim).mul(dh.pow(h_eps)).pow(-1.0));
    let inverse_time = Dimension { mass: 0.0, length: 0.0, time: -1.0 };
    if !omega_dim.approx_eq(inverse_time, 1e-9) || !eps_dim.approx_eq(Dimension::NONE, 1e-9) {
        return Err(Error::Domain(format!("dimension check failed: ω₀ ~ {omega_dim:?}, ε̃ ~ {eps_dim:?}")));
    }
    Ok(Adimensional { omega0, eps_tilde, gamma, mu })
}

/// Energy and torus frequency of a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub energy: f64,
    pub frequency: f64,
}

/// Bohr–Sommerfeld level `E_n = |n|^γ` and `ω_n = E_n − E_{n−1}`.
pub fn bs_spectrum(spec: &ModelSpec, n: i64) -> Result<SpectrumPoint> {
    let lattice = spec.lattice;
    lattice.index_of(n)?;
    if matches!(lattice, Lattice::HalfLine { .. }) && n < 1 {
        return Err(Error::LevelOutOfRange { level: n - 1, first: 0, last: lattice.last_level() });
    }
    Ok(SpectrumPoint { energy: level_energy(spec.gamma, n), frequency: torus_frequency(spec.gamma, n) })
}

/// Realization of the white noise as Gaussian kick amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickSequence {
    pub seed: u64,
    pub realization_index: u64,
    pub tau: f64,
    pub amplitudes: Vec<f64>,
}

impl KickSequence {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index`: `seed ⊕ splitmix64(index)`.
pub fn realization_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

/// RNG stream for one realization. Stream 0 carries the kicks, other streams
/// are free for initial conditions.
pub fn realization_rng(seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(seed, index));
    rng.set_stream(stream);
    rng
}

/// Kick amplitudes with variance `τ ε̃`, computed from standard normals of
/// stream 0, so sequences with different `ε̃` share the same normals.
pub fn generate_kicks_raw(seed: u64, realization_index: u64, eps_tilde: f64, tau: f64, steps: usize) -> KickSequence {
    let scale = (tau * eps_tilde).sqrt();
    let amplitudes = if scale == 0.0 {
        vec![0.0; steps]
    } else {
        let mut rng = realization_rng(seed, realization_index, 0);
        (0..steps).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    KickSequence { seed, realization_index, tau, amplitudes }
}

pub fn generate_kicks(seed: u64, realization_index: u64, spec: &ModelSpec, steps: usize) -> KickSequence {
    generate_kicks_raw(seed, realization_index, spec.eps_tilde, spec.tau, steps)
}

/// A real function of the angle as a finite Fourier series,
/// `c₀ + Σ_m (a_m cos mΘ + b_m sin mΘ)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AngleSeries {
    pub constant: f64,
    pub harmonics: Vec<Harmonic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub cos: f64,
    pub sin: f64,
}

impl AngleSeries {
    pub fn cosine(order: u32, amplitude: f64) -> Self {
        AngleSeries { constant: 0.0, harmonics: vec![Harmonic { order, cos: amplitude, sin: 0.0 }] }
    }

    pub fn constant(c: f64) -> Self {
        AngleSeries { constant: c, harmonics: Vec::new() }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.constant
            + self
                .harmonics
                .iter()
                .map(|h| {
                    let x = h.order as f64 * theta;
                    h.cos * x.cos() + h.sin * x.sin()
                })
                .sum::<f64>()
    }

    /// The same function evaluated at `Θ + φ`.
    pub fn shifted(&self, phi: f64) -> Self {
        let harmonics = self
            .harmonics
            .iter()
            .map(|h| {
                let (s, c) = (h.order as f64 * phi).sin_cos();
                Harmonic { order: h.order, cos: h.cos * c + h.sin * s, sin: h.sin * c - h.cos * s }
            })
            .collect();
        AngleSeries { constant: self.constant, harmonics }
    }
}

/// `q̄ = sqrt(⟨(∂²_Θ q)²⟩_Θ)`, exactly from the Fourier coefficients.
pub fn qbar(q: &AngleSeries) -> f64 {
    let mut by_order: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for h in &q.harmonics {
        let e = by_order.entry(h.order).or_default();
        e.0 += h.cos;
        e.1 += h.sin;
    }
    by_order
        .into_iter()
        .filter(|(m, _)| *m > 0)
        .map(|(m, (a, b))| {
            let m2 = (m as f64).powi(2);
            m2 * m2 * (a * a + b * b) / 2.0
        })
        .sum::<f64>()
        .sqrt()
}

/// Annealed classical Lyapunov rate from the quadratic-moment closure,
/// `2λ = (2 ε q̄² H″²)^{1/3}`.
pub fn classical_lyapunov_prediction(eps: f64, curvature: f64, qbar: f64) -> f64 {
    0.5 * (2.0 * eps * qbar * qbar * curvature * curvature).cbrt()
}

/// Prefactor conventions for the adimensional quantum rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovConvention {
    /// `2λ̃ = 2^{2/3} ε̃^{1/3} (γ(γ−1)n₀^{γ−2})^{2/3} n₀^{2μ/3}`, the root of
    /// the moment closure.
    #[default]
    MomentClosure,
    /// `λ̃ = 2 ε̃^{1/3} (γ(γ−1)n₀^{γ−2})^{2/3} n₀^{2μ/3}`, the rescaling used
    /// for collapse plots. Larger by `2^{4/3}`.
    CollapseAxis,
}

impl LyapunovConvention {
    pub fn prefactor(self) -> f64 {
        match self {
            LyapunovConvention::MomentClosure => 0.5 * 2f64.powf(2.0 / 3.0),
            LyapunovConvention::CollapseAxis => 2.0,
        }
    }
}

pub fn quantum_lyapunov_rate(gamma: f64, mu: f64, eps_tilde: f64, n0: f64, convention: LyapunovConvention) -> f64 {
    let curvature = spectrum_curvature(gamma, n0).abs();
    convention.prefactor() * eps_tilde.cbrt() * curvature.powf(2.0 / 3.0) * n0.abs().powf(2.0 * mu / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumRate {
    pub rate: f64,
    /// Set when the spectrum has no curvature (`γ = 1`) and no growth is predicted.
    pub no_curvature: bool,
}

pub fn quantum_lyapunov_prediction(spec: &ModelSpec, convention: LyapunovConvention) -> QuantumRate {
    let no_curvature = spec.gamma == 1.0;
    let rate = if no_curvature {
        0.0
    } else {
        quantum_lyapunov_rate(spec.gamma, spec.mu, spec.eps_tilde, spec.n0 as f64, convention)
    };
    QuantumRate { rate, no_curvature }
}

/// Dimensionless ratios of the validity criteria; each is LHS/RHS of a `≪`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeRatios {
    /// `ε̃ q̄²(n₀) / (n₀^{3/2} H″(n₀))`: energy diffusion per Lyapunov time.
    pub weak_ratio: f64,
    /// `|ω_{n₀} − ω_{n₀+Z}| / λ̃_Q`: infinite when no growth is predicted.
    pub zcrit_ratio: f64,
    /// `λ̃_Q / ω_{n₀}`: validity of angle averaging.
    pub averaging_ratio: f64,
}

/// `ε̃ q̄²(n) / (n^{3/2} |H″(n)|)` with `q̄² = 2 n^{2μ}`.
pub fn weak_ratio_at(gamma: f64, mu: f64, eps_tilde: f64, n: f64) -> f64 {
    let n = n.abs();
    eps_tilde * 2.0 * n.powf(2.0 * mu) / (n.powf(1.5) * spectrum_curvature(gamma, n).abs())
}

pub fn regime_checks(spec: &ModelSpec, z: u32) -> Result<RegimeRatios> {
    regime_checks_with(spec, z, LyapunovConvention::MomentClosure)
}

pub fn regime_checks_with(spec: &ModelSpec, z: u32, convention: LyapunovConvention) -> Result<RegimeRatios> {
    if z < 1 {
        return Err(Error::InvalidInput("level offset Z must be >= 1".into()));
    }
    let n0 = spec.n0 as f64;
    let weak_ratio = weak_ratio_at(spec.gamma, spec.mu, spec.eps_tilde, n0);
    let lambda = quantum_lyapunov_prediction(spec, convention).rate;
    let gap = (torus_frequency(spec.gamma, spec.n0) - torus_frequency(spec.gamma, spec.n0 + z as i64)).abs();
    let zcrit_ratio = if lambda > 0.0 { gap / lambda } else { f64::INFINITY };
    let averaging_ratio = lambda / torus_frequency(spec.gamma, spec.n0).abs();
    Ok(RegimeRatios { weak_ratio, zcrit_ratio, averaging_ratio })
}

/// `ε̃` that puts the moment-closure rate at `rate` for the given model shape.
pub fn eps_for_rate(gamma: f64, mu: f64, n0: f64, rate: f64) -> f64 {
    let unit = quantum_lyapunov_rate(gamma, mu, 1.0, n0, LyapunovConvention::MomentClosure);
    (rate / unit).powi(3)
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;
