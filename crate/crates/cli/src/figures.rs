//! Parameter sets of the published figures.

use std::path::Path;

use quasichaos::{Lattice, LyapunovConvention};

use crate::config::{ExperimentConfig, Mode};
use crate::error::CliError;
use crate::runner::{run, RunManifest};

pub const FIGURES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5a", "fig5b", "fig6a", "fig6b"];

/// Realization count scaled down (or up) by `scale`, at least `min`.
fn scaled(n: usize, scale: f64, min: usize) -> usize {
    ((n as f64 * scale).round() as usize).max(min)
}

fn quantum(label: &str, gamma: f64, n0: i64, size: usize, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(Mode::QuantumOtoc);
    c.label = Some(label.to_string());
    c.model.gamma = gamma;
    c.model.n0 = n0;
    c.model.lattice = Lattice::HalfLine { size };
    c.output = out.to_path_buf();
    // Long enough to show the plateau; fits stop earlier.
    c.schedule.lyapunov_times = 8.0;
    c.schedule.fit_lyapunov_times = Some(5.5);
    c
}

/// The configurations behind one figure, writing into `out`.
pub fn figure_configs(name: &str, scale: f64, out: &Path) -> Result<Vec<ExperimentConfig>, CliError> {
    if !(scale > 0.0) {
        return Err(CliError::Config(format!("scale must be positive, got {scale}")));
    }
    let configs = match name {
        "fig2" => {
            let mut c = ExperimentConfig::defaults(Mode::ClassicalPair);
            c.label = Some("fig2".into());
            c.realizations = scaled(1000, scale, 2);
            c.output = out.to_path_buf();
            vec![c]
        }
        "fig3" => [(8191, "fig3_n8191"), (255, "fig3_n255")]
            .into_iter()
            .map(|(n0, label)| {
                let mut c = quantum(label, 2.0, n0, 1 << 14, out);
                c.model.eps_tilde = 1e4;
                c.realizations = scaled(76, scale, 1);
                if n0 == 255 {
                    c.quantum.off_diagonal_offset = Some(10);
                }
                c
            })
            .collect(),
        "fig4" => {
            let mut c = quantum("fig4", 2.0, 8191, 1 << 14, out);
            c.model.eps_tilde = 1e4;
            c.realizations = scaled(76, scale, 1);
            c.quantum.histograms = true;
            vec![c]
        }
        "fig5a" => {
            let mut c = quantum("fig5a", 2.0, 8191, 1 << 14, out);
            c.mode = Mode::Sweep;
            c.realizations = scaled(86, scale, 1);
            c.sweep.n0 = (8..=13).map(|k| (1i64 << k) - 1).collect();
            c.sweep.sqrt_eps_over_n0 = vec![5e-3];
            c.sweep.lattice_from_n0 = true;
            vec![c]
        }
        "fig5b" => {
            let mut c = quantum("fig5b", 2.0, 8191, 1 << 14, out);
            c.mode = Mode::Sweep;
            // A single noise realization, whatever the scale.
            c.realizations = 1;
            c.sweep.sqrt_eps_over_n0 = vec![1e-2, 5e-3, 2e-3, 1e-3];
            vec![c]
        }
        "fig6a" | "fig6b" => {
            let gamma = if name == "fig6a" { 4.0 / 3.0 } else { 1.5 };
            let mut c = quantum(name, gamma, 511, 1 << 12, out);
            c.mode = Mode::Sweep;
            c.realizations = scaled(17, scale, 1);
            c.quantum.convention = LyapunovConvention::CollapseAxis;
            c.sweep.eps_tilde_over_n0_gamma = vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
            vec![c]
        }
        other => return Err(CliError::Config(format!("unknown figure {other:?}; expected one of {FIGURES:?}"))),
    };
    Ok(configs)
}

/// Runs every configuration of a figure; `adjust` can override fields
/// (seed, workers) before each run.
pub fn reproduce_figure(
    name: &str,
    scale: f64,
    out: &Path,
    adjust: impl Fn(&mut ExperimentConfig),
) -> Result<Vec<RunManifest>, CliError> {
    figure_configs(name, scale, out)?
        .into_iter()
        .map(|mut c| {
            adjust(&mut c);
            run(&c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_figure_validates() {
        for name in FIGURES {
            for c in figure_configs(name, 0.1, Path::new("x")).unwrap() {
                c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }

    #[test]
    fn stated_parameters() {
        let f2 = &figure_configs("fig2", 0.1, Path::new("x")).unwrap()[0];
        assert_eq!(f2.realizations, 100);
        let f6 = &figure_configs("fig6a", 1.0, Path::new("x")).unwrap()[0];
        assert_eq!((f6.model.gamma, f6.model.n0, f6.realizations), (4.0 / 3.0, 511, 17));
        assert_eq!(f6.sweep_points().len(), 5);
        let f4 = &figure_configs("fig4", 1.0, Path::new("x")).unwrap()[0];
        assert_eq!((f4.model.n0, f4.model.lattice.size()), (8191, 16384));
        assert!(figure_configs("fig7", 1.0, Path::new("x")).is_err());
        assert!(figure_configs("fig2", 0.0, Path::new("x")).is_err());
    }
}
