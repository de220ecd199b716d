//! Runs one experiment configuration and writes its outputs.

use std::fs;
use std::time::Instant;

use quasichaos::analysis::{fit_lyapunov, linear_fit, prescrambling_vs_n0, scaling_exponent, thermal_bound_curve, FitResult};
use quasichaos::classical::{moment_trajectory, pair_ensemble, tangent_moments, PairEnsembleConfig, TangentVector};
use quasichaos::model::{classical_lyapunov_prediction, generate_kicks, realization_seed, regime_checks, RegimeRatios};
use quasichaos::quantum::{linear_schedule, off_diagonal_commutator, otoc_ensemble, spread_histograms, OtocEnsemble};
use quasichaos::superop::{build_coefficients, initial_moments, integrate_moments, third_order_diagnostic};
use quasichaos::{LyapunovConvention, ModelSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FitTarget, Mode, ResolvedQuantum};
use crate::error::CliError;
use crate::output::{write_artifacts, write_file, Artifact, OutputFile, Table};

/// `q̄` of the rotor perturbation `2 cosΘ`.
pub const ROTOR_QBAR: f64 = std::f64::consts::SQRT_2;

/// A realization or sweep point whose numerical guard tripped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub point: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// `seed ⊕ splitmix64(i)` for each realization index `i`.
    pub realization_seeds: Vec<u64>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputFile>,
    pub warnings: Vec<String>,
    pub failures: Vec<Failure>,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Default)]
struct Collected {
    artifacts: Vec<Artifact>,
    warnings: Vec<String>,
    failures: Vec<Failure>,
}

impl Collected {
    /// Numerical-guard errors are recorded and the run goes on; anything
    /// else aborts it.
    fn guard<T>(&mut self, point: &str, r: quasichaos::Result<T>) -> Result<Option<T>, CliError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if e.is_numerical() => {
                self.failures.push(Failure { point: point.to_string(), error: e.to_string() });
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Validates, runs and writes `config`. The manifest is returned even when
/// some points failed; check [`RunManifest::succeeded`].
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let config = config.resolved()?;
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut outputs = vec![write_file(dir, &config.file_name("resolved-config.json"), &(config.to_json() + "\n"))?];

    let workers = config.workers.expect("resolved config has workers");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let collected = pool.install(|| match config.mode {
        Mode::ClassicalPair => classical_pair(&config),
        Mode::ClassicalMoments => classical_moments(&config),
        Mode::QuantumOtoc => quantum_otoc(&config),
        Mode::Superop => superop(&config),
        Mode::ThermalBound => thermal(&config),
        Mode::Sweep => sweep(&config),
    })?;
    outputs.extend(write_artifacts(dir, &collected.artifacts)?);

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        realization_seeds: (0..config.realizations as u64).map(|i| realization_seed(config.seed, i)).collect(),
        config: config.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs,
        warnings: collected.warnings,
        failures: collected.failures,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(dir, &config.file_name("manifest.json"), &text)?;
    Ok(manifest)
}

/// Fit on the samples with `t · clock ≤ horizon`, or on everything.
pub fn fit_window(
    times: &[f64],
    series: &[f64],
    guess: f64,
    clock: f64,
    horizon: Option<f64>,
) -> quasichaos::Result<FitResult> {
    let k = match horizon {
        Some(h) => times.iter().position(|&t| t * clock > h).unwrap_or(times.len()),
        None => times.len(),
    };
    fit_lyapunov(&times[..k], &series[..k], guess)
}

fn classical_steps(c: &ExperimentConfig) -> (usize, Vec<usize>) {
    let steps = (c.classical.lyapunov_times / c.classical.dt_fraction).ceil() as usize;
    let mut samples: Vec<usize> = (0..c.classical.samples).map(|i| i * steps / (c.classical.samples - 1)).collect();
    samples.dedup();
    (steps, samples)
}

fn classical_rate(eps: f64, what: &str) -> Result<f64, CliError> {
    let rate = classical_lyapunov_prediction(eps, 1.0, ROTOR_QBAR);
    if rate > 0.0 {
        Ok(rate)
    } else {
        Err(CliError::Config(format!("{what} needs eps > 0 to set the time step")))
    }
}

#[derive(Serialize)]
struct ClassicalSummary {
    scaling_quenched: Option<quasichaos::analysis::ScalingFit>,
    scaling_annealed: Option<quasichaos::analysis::ScalingFit>,
    fits: Vec<(f64, FitResult, FitResult)>,
}

fn classical_pair(c: &ExperimentConfig) -> Result<Collected, CliError> {
    let mut out = Collected::default();
    let (steps, samples) = classical_steps(c);
    let mut summary = ClassicalSummary { scaling_quenched: None, scaling_annealed: None, fits: Vec::new() };
    for (i, &eps) in c.classical.eps.iter().enumerate() {
        let rate = classical_rate(eps, "classical-pair")?;
        let cfg = PairEnsembleConfig {
            eps,
            dt: c.classical.dt_fraction / rate,
            steps,
            sample_steps: samples.clone(),
            pairs: c.realizations,
            seed: c.seed,
            initial_action: c.classical.initial_action,
            separation: c.classical.separation,
        };
        let point = format!("eps = {eps:e}");
        let Some(s) = out.guard(&point, pair_ensemble(&cfg))? else { continue };
        let quenched: Vec<f64> = s.mean_log_ucos.iter().map(|l| (2.0 * l).exp()).collect();
        let fq = fit_lyapunov(&s.times, &quenched, rate)?;
        let fa = fit_lyapunov(&s.times, &s.mean_sq_ucos, rate)?;
        let table = Table::new()
            .float("t", s.times.clone())
            .float("eps_third_t", s.times.iter().map(|t| t * eps.cbrt()).collect())
            .float("mean_log_ucos", s.mean_log_ucos.clone())
            .float("mean_log_uI", s.mean_log_uaction.clone())
            .float("mean_sq_ucos", s.mean_sq_ucos.clone())
            .float("mean_sq_uI", s.mean_sq_uaction.clone())
            .int("n_realizations", vec![s.n_realizations as i64; s.times.len()]);
        out.artifacts.push(Artifact::csv(c.file_name(&format!("classical_pair_{i:02}.csv")), table));
        summary.fits.push((eps, fq, fa));
    }
    let f = &summary.fits;
    let table = Table::new()
        .float("eps", f.iter().map(|x| x.0).collect())
        .float("lambda_pred", f.iter().map(|x| classical_lyapunov_prediction(x.0, 1.0, ROTOR_QBAR)).collect())
        .float("lambda_quenched", f.iter().map(|x| x.1.last_rate).collect())
        .bool("regime_quenched", f.iter().map(|x| x.1.regime_found).collect())
        .float("r2_quenched", f.iter().map(|x| x.1.r_squared).collect())
        .float("t_sat_quenched", f.iter().map(|x| x.1.prescrambling_time).collect())
        .float("lambda_annealed", f.iter().map(|x| x.2.last_rate).collect())
        .bool("regime_annealed", f.iter().map(|x| x.2.regime_found).collect())
        .float("r2_annealed", f.iter().map(|x| x.2.r_squared).collect())
        .float("t_sat_annealed", f.iter().map(|x| x.2.prescrambling_time).collect());
    out.artifacts.push(Artifact::csv(c.file_name("classical_pair_summary.csv"), table));
    if f.len() >= 3 {
        summary.scaling_quenched = scaling_exponent(&f.iter().map(|x| (x.0, x.1.last_rate)).collect::<Vec<_>>()).ok();
        summary.scaling_annealed = scaling_exponent(&f.iter().map(|x| (x.0, x.2.last_rate)).collect::<Vec<_>>()).ok();
    }
    out.artifacts.push(Artifact::json(c.file_name("classical_pair_fit.json"), &summary));
    Ok(out)
}

fn classical_moments(c: &ExperimentConfig) -> Result<Collected, CliError> {
    let mut out = Collected::default();
    if c.realizations < 2 {
        return Err(CliError::Config("classical-moments needs at least two realizations".into()));
    }
    let (steps, samples) = classical_steps(c);
    for (i, &eps) in c.classical.eps.iter().enumerate() {
        let rate = classical_rate(eps, "classical-moments")?;
        let dt = c.classical.dt_fraction / rate;
        let init = TangentVector { u_action: 0.0, u_angle: 1.0 };
        let m = tangent_moments(eps, dt, steps, &samples, c.realizations, c.seed, init)?;
        let ode = moment_trajectory(eps, 1.0, ROTOR_QBAR, [0.0, 1.0, 0.0], &m.times);
        let col = |v: &Vec<[f64; 3]>, k: usize| v.iter().map(|x| x[k]).collect::<Vec<f64>>();
        let table = Table::new()
            .float("t", m.times.clone())
            .float("lambda_t", m.times.iter().map(|t| t * rate).collect())
            .float("uI2", col(&m.mean, 0))
            .float("uI2_se", col(&m.stderr, 0))
            .float("uT2", col(&m.mean, 1))
            .float("uT2_se", col(&m.stderr, 1))
            .float("uIuT", col(&m.mean, 2))
            .float("uIuT_se", col(&m.stderr, 2))
            .float("ode_uI2", col(&ode, 0))
            .float("ode_uT2", col(&ode, 1))
            .float("ode_uIuT", col(&ode, 2));
        out.artifacts.push(Artifact::csv(c.file_name(&format!("classical_moments_{i:02}.csv")), table));
    }
    Ok(out)
}

/// Prediction, regime ratios and fit of one quantum point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocSummary {
    pub spec: ModelSpec,
    pub steps: usize,
    pub rate_moment_closure: f64,
    pub rate_collapse_axis: f64,
    pub regime: RegimeRatios,
    pub fit_on: FitTarget,
    pub fit: Option<FitResult>,
    pub leaking_realizations: Vec<u64>,
}

fn fit_series(c: &ExperimentConfig, e: &OtocEnsemble) -> Vec<f64> {
    match c.quantum.fit_on {
        FitTarget::Quenched => e.quenched_c2(),
        FitTarget::Annealed => e.mean_c2.clone(),
    }
}

/// Runs the OTOC ensemble of one point. `None` when a numerical guard failed.
fn otoc_point(
    c: &ExperimentConfig,
    r: &ResolvedQuantum,
    point: &str,
    out: &mut Collected,
) -> Result<Option<(OtocEnsemble, OtocSummary)>, CliError> {
    let t_end = r.steps as f64 * r.spec.tau;
    if let Err(e) = r.spec.check_edge_margin(t_end, 2) {
        out.warnings.push(format!("{point}: {e}"));
    }
    let Some(e) = out.guard(point, otoc_ensemble(&r.spec, c.seed, c.realizations, &r.schedule))? else {
        return Ok(None);
    };
    if !e.leaking_realizations.is_empty() {
        out.warnings.push(format!("{point}: edge population above threshold in realizations {:?}", e.leaking_realizations));
    }
    let fit = if r.rate > 0.0 {
        Some(fit_window(&e.times, &fit_series(c, &e), r.rate, r.closure_rate, c.schedule.fit_lyapunov_times)?)
    } else {
        None
    };
    let p = |conv| quasichaos::model::quantum_lyapunov_prediction(&r.spec, conv).rate;
    let summary = OtocSummary {
        spec: r.spec,
        steps: r.steps,
        rate_moment_closure: p(LyapunovConvention::MomentClosure),
        rate_collapse_axis: p(LyapunovConvention::CollapseAxis),
        regime: regime_checks(&r.spec, 1)?,
        fit_on: c.quantum.fit_on,
        fit,
        leaking_realizations: e.leaking_realizations.clone(),
    };
    Ok(Some((e, summary)))
}

fn otoc_table(e: &OtocEnsemble, rate: f64) -> Table {
    Table::new()
        .float("t", e.times.clone())
        .float("lambda_t", e.times.iter().map(|t| t * rate).collect())
        .float("mean_c2", e.mean_c2.clone())
        .float("quenched_c2", e.quenched_c2())
        .float("mean_log_c2", e.mean_log_c2.clone())
        .float("mean_level_variance", e.mean_second_moment.clone())
        .float("max_wave_std", e.max_wave_std.clone())
}

fn quantum_otoc(c: &ExperimentConfig) -> Result<Collected, CliError> {
    let mut out = Collected::default();
    let r = c.resolve_quantum(c.model.eps_tilde, c.model.n0, c.model.lattice)?;
    let Some((e, summary)) = otoc_point(c, &r, "quantum-otoc", &mut out)? else { return Ok(out) };
    out.artifacts.push(Artifact::csv(c.file_name("otoc.csv"), otoc_table(&e, r.rate)));
    out.artifacts.push(Artifact::json(c.file_name("otoc_fit.json"), &summary));
    if c.quantum.per_realization {
        let mut t = Table::new().float("t", e.times.clone());
        for (i, series) in e.per_realization.iter().enumerate() {
            t = t.float(format!("c2_{i}"), series.clone());
        }
        out.artifacts.push(Artifact::csv(c.file_name("otoc_realizations.csv"), t));
    }
    if let Some(offset) = c.quantum.off_diagonal_offset {
        let (a, b) = (r.spec.n0, r.spec.n0 + offset);
        let runs: Vec<quasichaos::Result<Vec<f64>>> = (0..c.realizations as u64)
            .into_par_iter()
            .map(|i| {
                let kicks = generate_kicks(c.seed, i, &r.spec, r.steps);
                off_diagonal_commutator(&r.spec, &kicks.amplitudes, a, b, &r.schedule)
            })
            .collect();
        let mut mean = vec![0.0; r.schedule.len()];
        for run in runs {
            let Some(v) = out.guard("off-diagonal", run)? else { continue };
            mean.iter_mut().zip(&v).for_each(|(m, x)| *m += x / c.realizations as f64);
        }
        let t = Table::new()
            .float("t", e.times.clone())
            .float("lambda_t", e.times.iter().map(|t| t * r.rate).collect())
            .float("off_diagonal", mean)
            .float("diagonal", e.mean_c2.clone());
        out.artifacts.push(Artifact::csv(c.file_name("off_diagonal.csv"), t));
    }
    if c.quantum.histograms {
        histograms(c, &r, &mut out)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct HistogramIndex {
    first_level: i64,
    realizations: usize,
    times: Vec<f64>,
    files: Vec<String>,
}

fn histograms(c: &ExperimentConfig, r: &ResolvedQuantum, out: &mut Collected) -> Result<(), CliError> {
    let schedule = linear_schedule(r.steps, 12.min(r.steps + 1));
    let runs: Vec<_> = (0..c.realizations as u64)
        .into_par_iter()
        .map(|i| {
            let kicks = generate_kicks(c.seed, i, &r.spec, r.steps);
            spread_histograms(&r.spec, &kicks.amplitudes, &schedule)
        })
        .collect();
    let m = r.spec.lattice.size();
    let mut wave = vec![vec![0.0; m]; schedule.len()];
    let mut column = vec![vec![0.0; m]; schedule.len()];
    let mut used = 0;
    let mut first = None;
    for run in runs {
        let Some(h) = out.guard("histograms", run)? else { continue };
        used += 1;
        for k in 0..schedule.len() {
            wave[k].iter_mut().zip(&h.wave[k]).for_each(|(a, x)| *a += x);
            column[k].iter_mut().zip(&h.cos_column[k]).for_each(|(a, x)| *a += x);
        }
        first.get_or_insert(h);
    }
    let Some(h) = first else { return Ok(()) };
    let levels: Vec<i64> = r.spec.lattice.levels().collect();
    let mut files = Vec::new();
    for k in 0..schedule.len() {
        let name = c.file_name(&format!("histogram_{k:03}.csv"));
        let norm = |v: &Vec<f64>| v.iter().map(|x| x / used as f64).collect::<Vec<f64>>();
        let t = Table::new().int("n", levels.clone()).float("wave", norm(&wave[k])).float("cos_column", norm(&column[k]));
        out.artifacts.push(Artifact::csv(name.clone(), t));
        files.push(name);
    }
    let index = HistogramIndex { first_level: h.first_level, realizations: used, times: h.times, files };
    out.artifacts.push(Artifact::json(c.file_name("histograms.json"), &index));
    Ok(())
}

#[derive(Serialize)]
struct SuperopSummary {
    band: usize,
    window: usize,
    dt: f64,
    rate_moment_closure: f64,
    /// Half the late-time log slope of the trace.
    trace_rate: f64,
    trace_rate_over_prediction: f64,
    leakage_fraction: f64,
    third_order_rate: f64,
    j_term_ratio: f64,
}

/// Half the log slope of a positive series over its second half.
pub fn late_rate(times: &[f64], series: &[f64]) -> quasichaos::Result<f64> {
    let h = times.len() / 2;
    let y: Vec<f64> = series[h..].iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&times[h..], &y)?.slope / 2.0)
}

fn superop(c: &ExperimentConfig) -> Result<Collected, CliError> {
    let mut out = Collected::default();
    let r = c.resolve_quantum(c.model.eps_tilde, c.model.n0, c.model.lattice)?;
    let s = &c.superop;
    let coeff = build_coefficients(&r.spec, s.band, s.window)?;
    let closure = quasichaos::model::quantum_lyapunov_prediction(&r.spec, LyapunovConvention::MomentClosure).rate;
    let third = third_order_diagnostic(&coeff, r.spec.eps_tilde, r.spec.n0, r.spec.n0)?;
    let scale = coeff.max_abs_j().max(third.growth_rate);
    if !(scale > 0.0) {
        return Err(CliError::Config("superop needs a curved spectrum and eps_tilde > 0".into()));
    }
    let dt = s.dt_fraction / scale;
    let t_end = r.steps as f64 * r.spec.tau;
    let Some(m) = out.guard(
        "superop",
        integrate_moments(&coeff, &initial_moments(&coeff), r.spec.eps_tilde, t_end, dt, s.record_every),
    )?
    else {
        return Ok(out);
    };
    let table = Table::new()
        .float("t", m.times.clone())
        .float("lambda_t", m.times.iter().map(|t| t * closure).collect())
        .float("tt_trace", m.tt_trace.clone())
        .float("tt_total", m.tt_total.clone())
        .float("tt_row_n0", m.tt_row_n0.clone())
        .float("nn_total", m.nn_total.clone());
    out.artifacts.push(Artifact::csv(c.file_name("superop.csv"), table));
    let trace_rate = late_rate(&m.times, &m.tt_trace)?;
    let summary = SuperopSummary {
        band: s.band,
        window: s.window,
        dt,
        rate_moment_closure: closure,
        trace_rate,
        trace_rate_over_prediction: trace_rate / closure,
        leakage_fraction: m.leakage_fraction,
        third_order_rate: third.growth_rate,
        j_term_ratio: third.j_term_ratio,
    };
    out.artifacts.push(Artifact::json(c.file_name("superop_summary.json"), &summary));
    Ok(out)
}

fn thermal(c: &ExperimentConfig) -> Result<Collected, CliError> {
    let mut out = Collected::default();
    let m = &c.model;
    let Some(points) = out.guard("thermal-bound", thermal_bound_curve(m.gamma, m.mu, m.eps_tilde, &c.thermal.k_grid))? else {
        return Ok(out);
    };
    let table = Table::new()
        .float("beta_hbar_omega0", points.iter().map(|p| p.beta_hbar_omega0).collect())
        .float("n_T", points.iter().map(|p| p.n_t).collect())
        .float("lambda_T", points.iter().map(|p| p.lambda_t_adim).collect())
        .float("g", points.iter().map(|p| p.g).collect())
        .float("weak_ratio", points.iter().map(|p| p.weak_ratio).collect())
        .bool("no_regime", points.iter().map(|p| p.no_regime).collect())
        .bool("bound_relevant", points.iter().map(|p| p.bound_relevant).collect());
    out.artifacts.push(Artifact::csv(c.file_name("thermal_bound.csv"), table));
    Ok(out)
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n0: i64,
    pub eps_tilde: f64,
    pub summary: OtocSummary,
}

#[derive(Serialize)]
struct SweepFits {
    prescrambling: Option<quasichaos::analysis::PrescramblingTrend>,
    prescrambling_error: Option<String>,
    rows: Vec<SweepRow>,
}

fn sweep(c: &ExperimentConfig) -> Result<Collected, CliError> {
    let mut out = Collected::default();
    let mut rows = Vec::new();
    for (i, p) in c.sweep_points().into_iter().enumerate() {
        let r = c.resolve_quantum(p.eps_tilde, p.n0, p.lattice)?;
        let point = format!("n0 = {}, eps_tilde = {:e}", p.n0, p.eps_tilde);
        let Some((e, summary)) = otoc_point(c, &r, &point, &mut out)? else { continue };
        out.artifacts.push(Artifact::csv(c.file_name(&format!("sweep_{i:03}.csv")), otoc_table(&e, r.rate)));
        rows.push(SweepRow { n0: p.n0, eps_tilde: p.eps_tilde, summary });
    }
    let fits: Vec<Option<&FitResult>> = rows.iter().map(|r| r.summary.fit.as_ref()).collect();
    let get = |f: &dyn Fn(&FitResult) -> f64| fits.iter().map(|x| x.map_or(f64::NAN, f)).collect::<Vec<f64>>();
    let table = Table::new()
        .int("n0", rows.iter().map(|r| r.n0).collect())
        .float("eps_tilde", rows.iter().map(|r| r.eps_tilde).collect())
        .int("lattice_size", rows.iter().map(|r| r.summary.spec.lattice.size() as i64).collect())
        .float("tau", rows.iter().map(|r| r.summary.spec.tau).collect())
        .int("steps", rows.iter().map(|r| r.summary.steps as i64).collect())
        .float("rate_moment_closure", rows.iter().map(|r| r.summary.rate_moment_closure).collect())
        .float("rate_collapse_axis", rows.iter().map(|r| r.summary.rate_collapse_axis).collect())
        .float("zcrit_ratio", rows.iter().map(|r| r.summary.regime.zcrit_ratio).collect())
        .float("weak_ratio", rows.iter().map(|r| r.summary.regime.weak_ratio).collect())
        .float("lambda_hat", get(&|f| f.lambda_hat.unwrap_or(f64::NAN)))
        .float("last_rate", get(&|f| f.last_rate))
        .float("r_squared", get(&|f| f.r_squared))
        .float("window_start", get(&|f| f.window.map_or(f64::NAN, |w| w.0)))
        .float("window_end", get(&|f| f.window.map_or(f64::NAN, |w| w.1)))
        .float("prescrambling_time", get(&|f| f.prescrambling_time))
        .float("onset_time", get(&|f| f.onset_time.unwrap_or(f64::NAN)))
        .bool("regime_found", fits.iter().map(|f| f.is_some_and(|f| f.regime_found)).collect())
        .int("leaking_realizations", rows.iter().map(|r| r.summary.leaking_realizations.len() as i64).collect());
    out.artifacts.push(Artifact::csv(c.file_name("sweep_summary.csv"), table));

    let pairs: Vec<(f64, FitResult)> =
        rows.iter().filter_map(|r| r.summary.fit.clone().map(|f| (r.n0 as f64, f))).collect();
    let (prescrambling, prescrambling_error) = if c.sweep.n0.len() >= 2 {
        match prescrambling_vs_n0(&pairs) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    out.artifacts.push(Artifact::json(c.file_name("sweep_fits.json"), &SweepFits { prescrambling, prescrambling_error, rows }));
    Ok(out)
}
