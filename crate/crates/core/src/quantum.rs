//! Split-step propagation of the randomly kicked quantum model,
//! `U_τ(r) = e^{−iN^γτ} e^{−2ir cosΘ}`, and the observables built from the
//! Heisenberg column `U(t)† cosΘ U(t)|n₀⟩`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{generate_kicks, level_energy, Lattice, ModelSpec, TWO_PI};

/// Most samples one backward-propagation run may request.
pub const MAX_SAMPLES: usize = 128;
/// Edge population above which a state is flagged as leaking.
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;
/// Fraction of the lattice on each side counted as edge.
pub const EDGE_FRACTION: f64 = 0.01;
/// Memory allowed for cached kick phases in one propagation.
pub const PHASE_CACHE_BYTES: usize = 256 << 20;

/// Amplitudes over the lattice levels, in the level basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub lattice: Lattice,
    pub amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// The level eigenstate `|n⟩`.
    pub fn basis(lattice: Lattice, n: i64) -> Result<Self> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); lattice.size()];
        amplitudes[lattice.index_of(n)?] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { lattice, amplitudes })
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn edge_population(&self) -> f64 {
        edge_population(&self.amplitudes)
    }

    pub fn leaking(&self) -> bool {
        self.edge_population() > LEAKAGE_THRESHOLD
    }

    pub fn occupations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Weight in the outer `EDGE_FRACTION` of levels (at least one) on each side.
pub fn edge_population(v: &[Complex64]) -> f64 {
    let w = ((v.len() as f64 * EDGE_FRACTION).ceil() as usize).max(1).min(v.len() / 2);
    let head: f64 = v[..w].iter().map(|a| a.norm_sqr()).sum();
    let tail: f64 = v[v.len() - w..].iter().map(|a| a.norm_sqr()).sum();
    head + tail
}

/// `cosΘ` acting on level amplitudes: `out_n = (a_{n−1} + a_{n+1})/2`,
/// with neighbors outside the lattice dropped.
pub fn apply_cos_theta(input: &[Complex64], out: &mut [Complex64]) {
    let m = input.len();
    assert_eq!(m, out.len());
    if m == 0 {
        return;
    }
    if m == 1 {
        out[0] = Complex64::new(0.0, 0.0);
        return;
    }
    out[0] = 0.5 * input[1];
    for i in 1..m - 1 {
        out[i] = 0.5 * (input[i - 1] + input[i + 1]);
    }
    out[m - 1] = 0.5 * input[m - 2];
}

/// Reusable propagation workspace for one model: FFT plans, the free
/// phases `e^{−iE_nτ}` and the angle grid.
pub struct Propagator {
    lattice: Lattice,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    free: Vec<Complex64>,
    cos_grid: Vec<f64>,
    phases: Vec<Complex64>,
    cache: Vec<Vec<Complex64>>,
    cache_limit: usize,
}

impl Propagator {
    pub fn new(spec: &ModelSpec) -> Self {
        let lattice = spec.lattice;
        let m = lattice.size();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let free = lattice
            .levels()
            .map(|n| {
                let (s, c) = (level_energy(spec.gamma, n) * spec.tau).sin_cos();
                Complex64::new(c, -s)
            })
            .collect();
        let cos_grid = (0..m).map(|k| (TWO_PI * k as f64 / m as f64).cos()).collect();
        let stored = if m % 4 == 0 { m / 4 + 1 } else { m };
        Propagator {
            lattice,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            free,
            cos_grid,
            phases: vec![Complex64::new(0.0, 0.0); stored],
            cache: Vec::new(),
            cache_limit: PHASE_CACHE_BYTES / (stored * std::mem::size_of::<Complex64>()),
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Multiplies level `n` by `e^{−iE_nτ}`.
    pub fn free_step(&self, psi: &mut [Complex64]) {
        for (a, p) in psi.iter_mut().zip(&self.free) {
            *a *= p;
        }
    }

    pub fn free_step_inverse(&self, psi: &mut [Complex64]) {
        for (a, p) in psi.iter_mut().zip(&self.free) {
            *a *= p.conj();
        }
    }

    /// Applies an arbitrary function of the angle through the angle grid
    /// `θ_k = 2πk/M`. The transform is oriented so that `e^{iΘ}|n⟩ = |n+1⟩`.
    pub fn apply_angle_function(&mut self, psi: &mut [Complex64], f: impl Fn(f64) -> Complex64) {
        let m = psi.len();
        self.inverse.process_with_scratch(psi, &mut self.scratch);
        let scale = 1.0 / m as f64;
        for (k, a) in psi.iter_mut().enumerate() {
            *a *= f(TWO_PI * k as f64 / m as f64) * scale;
        }
        self.forward.process_with_scratch(psi, &mut self.scratch);
    }

    /// `e^{−2ir cosΘ}` through the angle grid.
    pub fn kick_step(&mut self, psi: &mut [Complex64], r: f64) {
        if r == 0.0 {
            return;
        }
        fill_kick_phases(&self.cos_grid, r, &mut self.phases);
        let phases = std::mem::take(&mut self.phases);
        self.apply_phases(psi, &phases, false);
        self.phases = phases;
    }

    fn apply_phases(&mut self, psi: &mut [Complex64], phases: &[Complex64], conjugate: bool) {
        let m = psi.len();
        self.inverse.process_with_scratch(psi, &mut self.scratch);
        if phases.len() == m {
            for (a, p) in psi.iter_mut().zip(phases) {
                *a *= if conjugate { p.conj() } else { *p };
            }
        } else {
            // cos θ is even about 0 and odd about π/2: only a quarter is stored.
            let (q, h) = (m / 4, m / 2);
            for (k, p) in phases.iter().enumerate() {
                let p = if conjugate { p.conj() } else { *p };
                let pc = p.conj();
                psi[k] *= p;
                if k == 0 {
                    psi[h] *= pc;
                } else if k < q {
                    psi[m - k] *= p;
                    psi[h - k] *= pc;
                    psi[h + k] *= pc;
                } else {
                    psi[m - k] *= p;
                }
            }
        }
        self.forward.process_with_scratch(psi, &mut self.scratch);
    }

    /// Kick number `index` of amplitude `r`, inverted if `inverse`. Phase
    /// tables are cached by index while memory allows, so the index must
    /// always refer to the same amplitude.
    fn indexed_kick(&mut self, psi: &mut [Complex64], index: usize, r: f64, inverse: bool) {
        if r == 0.0 {
            return;
        }
        if index < self.cache.len() {
            let phases = std::mem::take(&mut self.cache[index]);
            self.apply_phases(psi, &phases, inverse);
            self.cache[index] = phases;
            return;
        }
        fill_kick_phases(&self.cos_grid, r, &mut self.phases);
        if index == self.cache.len() && index < self.cache_limit {
            self.cache.push(self.phases.clone());
        }
        let phases = std::mem::take(&mut self.phases);
        self.apply_phases(psi, &phases, inverse);
        self.phases = phases;
    }

    /// One period: kick, then free evolution.
    pub fn step(&mut self, psi: &mut [Complex64], r: f64) {
        self.kick_step(psi, r);
        self.free_step(psi);
    }

    /// Inverse of [`Propagator::step`].
    pub fn step_inverse(&mut self, psi: &mut [Complex64], r: f64) {
        self.free_step_inverse(psi);
        self.kick_step(psi, -r);
    }

    /// Applies `U(t)` for the kicks `rs[from..to]` to a level-basis vector.
    fn forward_range(&mut self, psi: &mut [Complex64], rs: &[f64], from: usize, to: usize) {
        for (k, &r) in rs.iter().enumerate().take(to).skip(from) {
            self.indexed_kick(psi, k, r, false);
            self.free_step(psi);
        }
    }

    /// Applies `U(t)†` for the kicks `rs[..to]`.
    fn backward(&mut self, psi: &mut [Complex64], rs: &[f64], to: usize) {
        for k in (0..to).rev() {
            self.free_step_inverse(psi);
            self.indexed_kick(psi, k, rs[k], true);
        }
    }
}

/// `e^{−2ir cosθ_k}/M` on the stored part of the angle grid.
fn fill_kick_phases(cos_grid: &[f64], r: f64, out: &mut [Complex64]) {
    let scale = 1.0 / cos_grid.len() as f64;
    for (p, &c) in out.iter_mut().zip(cos_grid) {
        let (s, co) = (2.0 * r * c).sin_cos();
        *p = Complex64::new(co * scale, -s * scale);
    }
}

/// Free evolution of a state over time `tau` for spectrum exponent `gamma`.
pub fn free_step(state: &mut QuantumState, gamma: f64, tau: f64) {
    for (a, n) in state.amplitudes.iter_mut().zip(state.lattice.levels()) {
        let (s, c) = (level_energy(gamma, n) * tau).sin_cos();
        *a *= Complex64::new(c, -s);
    }
}

/// One kick `e^{−2ir cosΘ}`. Sets the returned flag if the result leaks
/// into the edges.
pub fn kick_step(state: &mut QuantumState, r: f64) -> bool {
    let spec = ModelSpec { gamma: 2.0, mu: 0.0, eps_tilde: 0.0, tau: 1.0, lattice: state.lattice, n0: 0 };
    Propagator::new(&spec).kick_step(&mut state.amplitudes, r);
    state.leaking()
}

/// Sample steps `0, total/(count−1), ..., total`, deduplicated.
pub fn linear_schedule(total_steps: usize, count: usize) -> Vec<usize> {
    let mut v: Vec<usize> = if count < 2 {
        vec![total_steps]
    } else {
        (0..count).map(|i| ((i as f64) * total_steps as f64 / (count - 1) as f64).round() as usize).collect()
    };
    v.dedup();
    v
}

/// Geometric grid from step 1 up to `total_steps` merged with a linear grid,
/// plus step 0.
pub fn geometric_linear_schedule(total_steps: usize, geometric: usize, linear: usize) -> Vec<usize> {
    let mut v = linear_schedule(total_steps, linear);
    if geometric > 1 && total_steps > 1 {
        let ratio = (total_steps as f64).ln() / (geometric - 1) as f64;
        v.extend((0..geometric).map(|i| (ratio * i as f64).exp().round() as usize));
    }
    v.push(0);
    v.sort_unstable();
    v.dedup();
    v
}

fn check_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() || schedule.len() > MAX_SAMPLES {
        return Err(Error::InvalidInput(format!("need between 1 and {MAX_SAMPLES} samples, got {}", schedule.len())));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("sample steps must be strictly increasing".into()));
    }
    Ok(())
}

/// What [`heisenberg_columns`] hands to its visitor at each sample.
pub struct ColumnSample<'a> {
    pub sample: usize,
    pub step: usize,
    /// `U(t)|b⟩`.
    pub forward: &'a [Complex64],
    /// `U(t)† cosΘ U(t)|b⟩`.
    pub column: &'a [Complex64],
}

/// Computes the Heisenberg-evolved column `U(t)† cosΘ U(t)|start⟩` at each
/// sample step by forward propagation followed by backward propagation of
/// `cosΘ U(t)|start⟩` through the reversed kick train.
pub fn heisenberg_columns(
    spec: &ModelSpec,
    kicks: &[f64],
    start: i64,
    schedule: &[usize],
    mut visit: impl FnMut(ColumnSample<'_>) -> Result<()>,
) -> Result<()> {
    spec.validate()?;
    check_schedule(schedule)?;
    if let Some(&last) = schedule.last() {
        if last > kicks.len() {
            return Err(Error::InvalidInput(format!("sample step {last} exceeds the {} kicks", kicks.len())));
        }
    }
    let mut prop = Propagator::new(spec);
    let mut f = QuantumState::basis(spec.lattice, start)?.amplitudes;
    let mut h = vec![Complex64::new(0.0, 0.0); f.len()];
    let mut at = 0;
    for (sample, &step) in schedule.iter().enumerate() {
        prop.forward_range(&mut f, kicks, at, step);
        at = step;
        apply_cos_theta(&f, &mut h);
        prop.backward(&mut h, kicks, step);
        if !f.iter().chain(h.iter()).all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::NonFinite { what: "Heisenberg column", step });
        }
        visit(ColumnSample { sample, step, forward: &f, column: &h })?;
    }
    Ok(())
}

/// OTOC of one noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    /// `C²(t) = 2 Σ_n (n−n₀)² |⟨n|U† cosΘ U|n₀⟩|²`.
    pub c2: Vec<f64>,
    /// `‖U(t)|n₀⟩‖²`.
    pub wave_norm: Vec<f64>,
    /// `⟨N⟩` in `U(t)|n₀⟩`.
    pub wave_mean: Vec<f64>,
    /// `⟨(N−n₀)²⟩` in `U(t)|n₀⟩`.
    pub wave_second_moment: Vec<f64>,
    /// Largest edge population seen in either vector.
    pub max_edge_population: f64,
    pub leakage: bool,
    pub n0: i64,
}

impl OtocSeries {
    /// Standard deviation of `N` in the wavefunction at each sample.
    pub fn wave_std(&self) -> Vec<f64> {
        let n0 = self.n0 as f64;
        self.wave_mean
            .iter()
            .zip(&self.wave_second_moment)
            .map(|(m, s)| (s - (m - n0).powi(2)).max(0.0).sqrt())
            .collect()
    }
}

pub fn otoc_series(spec: &ModelSpec, kicks: &[f64], schedule: &[usize]) -> Result<OtocSeries> {
    let n0 = spec.n0;
    let levels: Vec<f64> = spec.lattice.levels().map(|n| (n - n0) as f64).collect();
    let mut out = OtocSeries {
        times: schedule.iter().map(|&s| s as f64 * spec.tau).collect(),
        c2: Vec::with_capacity(schedule.len()),
        wave_norm: Vec::with_capacity(schedule.len()),
        wave_mean: Vec::with_capacity(schedule.len()),
        wave_second_moment: Vec::with_capacity(schedule.len()),
        max_edge_population: 0.0,
        leakage: false,
        n0,
    };
    heisenberg_columns(spec, kicks, n0, schedule, |s| {
        let c2 = 2.0 * s.column.iter().zip(&levels).map(|(g, d)| d * d * g.norm_sqr()).sum::<f64>();
        let (mut norm, mut mean, mut second) = (0.0, 0.0, 0.0);
        for (a, d) in s.forward.iter().zip(&levels) {
            let p = a.norm_sqr();
            norm += p;
            mean += p * d;
            second += p * d * d;
        }
        out.c2.push(c2);
        out.wave_norm.push(norm);
        out.wave_mean.push(n0 as f64 + mean / norm);
        out.wave_second_moment.push(second / norm);
        let edge = edge_population(s.forward).max(edge_population(s.column));
        out.max_edge_population = out.max_edge_population.max(edge);
        Ok(())
    })?;
    out.leakage = out.max_edge_population > LEAKAGE_THRESHOLD;
    Ok(out)
}

/// `|C²_{ab}(t)|`, an off-diagonal element of the squared commutator
/// `−[cosΘ(t), N]²`: `2 |Σ_n (n−a)(n−b) g_a(n)* g_b(n)|` with
/// `g_x = U(t)† cosΘ U(t)|x⟩`. The diagonal `a = b` is the OTOC.
pub fn off_diagonal_commutator(spec: &ModelSpec, kicks: &[f64], a: i64, b: i64, schedule: &[usize]) -> Result<Vec<f64>> {
    spec.lattice.index_of(a)?;
    spec.lattice.index_of(b)?;
    let mut columns_a = Vec::with_capacity(schedule.len());
    heisenberg_columns(spec, kicks, a, schedule, |s| {
        columns_a.push(s.column.to_vec());
        Ok(())
    })?;
    let levels: Vec<i64> = spec.lattice.levels().collect();
    let mut out = Vec::with_capacity(schedule.len());
    heisenberg_columns(spec, kicks, b, schedule, |s| {
        let ga = &columns_a[s.sample];
        let sum: Complex64 = levels
            .iter()
            .zip(ga.iter().zip(s.column))
            .map(|(&n, (x, y))| x.conj() * y * ((n - a) * (n - b)) as f64)
            .sum();
        out.push(2.0 * sum.norm());
        Ok(())
    })?;
    Ok(out)
}

/// Level occupations of `U(t)|n₀⟩` and of `U(t)† cosΘ U(t)|n₀⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadHistogram {
    pub times: Vec<f64>,
    pub first_level: i64,
    pub wave: Vec<Vec<f64>>,
    pub cos_column: Vec<Vec<f64>>,
}

pub fn spread_histograms(spec: &ModelSpec, kicks: &[f64], schedule: &[usize]) -> Result<SpreadHistogram> {
    let mut out = SpreadHistogram {
        times: schedule.iter().map(|&s| s as f64 * spec.tau).collect(),
        first_level: spec.lattice.first_level(),
        wave: Vec::new(),
        cos_column: Vec::new(),
    };
    heisenberg_columns(spec, kicks, spec.n0, schedule, |s| {
        out.wave.push(s.forward.iter().map(|a| a.norm_sqr()).collect());
        out.cos_column.push(s.column.iter().map(|a| a.norm_sqr()).collect());
        Ok(())
    })?;
    Ok(out)
}

/// Realization-averaged OTOC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocEnsemble {
    pub times: Vec<f64>,
    /// Annealed average `⟨C²⟩`.
    pub mean_c2: Vec<f64>,
    /// Quenched average `⟨ln C²⟩`.
    pub mean_log_c2: Vec<f64>,
    /// `⟨⟨(N−n₀)²⟩⟩` over realizations.
    pub mean_second_moment: Vec<f64>,
    /// Largest wavefunction standard deviation in `N` over realizations.
    pub max_wave_std: Vec<f64>,
    pub per_realization: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub leaking_realizations: Vec<u64>,
}

impl OtocEnsemble {
    pub fn n_realizations(&self) -> usize {
        self.per_realization.len()
    }

    /// `exp⟨ln C²⟩`, the series the quenched rate is fitted on.
    pub fn quenched_c2(&self) -> Vec<f64> {
        self.mean_log_c2.iter().map(|l| l.exp()).collect()
    }
}

/// Runs `realizations` independent kick trains on the current rayon pool
/// and reduces them in realization order.
pub fn otoc_ensemble(spec: &ModelSpec, seed: u64, realizations: usize, schedule: &[usize]) -> Result<OtocEnsemble> {
    if realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    let steps = schedule.last().copied().unwrap_or(0);
    let runs: Vec<OtocSeries> = (0..realizations as u64)
        .into_par_iter()
        .map(|i| {
            let kicks = generate_kicks(seed, i, spec, steps);
            otoc_series(spec, &kicks.amplitudes, schedule)
        })
        .collect::<Result<_>>()?;
    let k = schedule.len();
    let n = realizations as f64;
    let mut out = OtocEnsemble {
        times: runs[0].times.clone(),
        mean_c2: vec![0.0; k],
        mean_log_c2: vec![0.0; k],
        mean_second_moment: vec![0.0; k],
        max_wave_std: vec![0.0; k],
        per_realization: Vec::with_capacity(realizations),
        seeds: (0..realizations as u64).map(|i| crate::model::realization_seed(seed, i)).collect(),
        leaking_realizations: Vec::new(),
    };
    for (i, run) in runs.into_iter().enumerate() {
        let std = run.wave_std();
        for s in 0..k {
            out.mean_c2[s] += run.c2[s] / n;
            out.mean_log_c2[s] += run.c2[s].ln() / n;
            out.mean_second_moment[s] += run.wave_second_moment[s] / n;
            out.max_wave_std[s] = out.max_wave_std[s].max(std[s]);
        }
        if run.leakage {
            out.leaking_realizations.push(i as u64);
        }
        out.per_realization.push(run.c2);
    }
    Ok(out)
}
