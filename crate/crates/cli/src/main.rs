use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasichaos::Lattice;
use quasichaos_cli::figures::reproduce_figure;
use quasichaos_cli::{run, CliError, ExperimentConfig, Mode, RunManifest};

/// Noise-driven chaos in quasi-integrable systems: simulations and fits.
#[derive(Parser)]
#[command(name = "quasichaos", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file as is (flags override its keys).
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Classical pair separations of the kicked rotor.
    ClassicalPair(ModeArgs),
    /// Classical tangent moments against the moment equations.
    ClassicalMoments(ModeArgs),
    /// Quantum OTOC ensemble.
    QuantumOtoc(ModeArgs),
    /// Banded moment equations of the quantum tangent space.
    Superop(ModeArgs),
    /// Thermal level and g over a grid of inverse temperatures.
    ThermalBound(ModeArgs),
    /// OTOC fits over lists of strengths and initial levels.
    Sweep(ModeArgs),
    /// Rerun the parameter set of a figure.
    Figure {
        /// fig2, fig3, fig4, fig5a, fig5b, fig6a or fig6b.
        name: String,
        /// Multiplies the realization counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the default configuration of a mode.
    DefaultConfig { mode: Mode },
}

#[derive(Args)]
struct ModeArgs {
    /// Start from this configuration instead of the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    eps_tilde: Option<f64>,
    #[arg(long)]
    n0: Option<i64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lattice_size: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        let m = &mut c.model;
        if let Some(v) = self.eps_tilde {
            m.eps_tilde = v;
        }
        if let Some(v) = self.n0 {
            m.n0 = v;
        }
        if let Some(v) = self.gamma {
            m.gamma = v;
        }
        if let Some(v) = self.tau {
            m.tau = Some(v);
        }
        if let Some(size) = self.lattice_size {
            m.lattice = match m.lattice {
                Lattice::HalfLine { .. } => Lattice::HalfLine { size },
                Lattice::Symmetric { .. } => Lattice::Symmetric { size },
            };
        }
        if let Some(v) = self.steps {
            c.schedule.steps = Some(v);
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.realizations {
            c.realizations = v;
        }
        if let Some(v) = &self.out {
            c.output = v.clone();
        }
        if let Some(v) = self.workers {
            c.workers = Some(v);
        }
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ExperimentConfig::from_json(&text)
}

fn run_mode(mode: Mode, args: &ModeArgs) -> Result<Vec<RunManifest>, CliError> {
    let mut c = match &args.config {
        Some(p) => load(p)?,
        None => ExperimentConfig::defaults(mode),
    };
    c.mode = mode;
    args.overrides.apply(&mut c);
    Ok(vec![run(&c)?])
}

fn execute(cli: Cli) -> Result<Vec<RunManifest>, CliError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut c = load(&config)?;
            overrides.apply(&mut c);
            Ok(vec![run(&c)?])
        }
        Command::ClassicalPair(a) => run_mode(Mode::ClassicalPair, &a),
        Command::ClassicalMoments(a) => run_mode(Mode::ClassicalMoments, &a),
        Command::QuantumOtoc(a) => run_mode(Mode::QuantumOtoc, &a),
        Command::Superop(a) => run_mode(Mode::Superop, &a),
        Command::ThermalBound(a) => run_mode(Mode::ThermalBound, &a),
        Command::Sweep(a) => run_mode(Mode::Sweep, &a),
        Command::Figure { name, scale, out, seed, workers } => reproduce_figure(&name, scale, &out, |c| {
            if let Some(s) = seed {
                c.seed = s;
            }
            if workers.is_some() {
                c.workers = workers;
            }
        }),
        Command::DefaultConfig { mode } => {
            println!("{}", ExperimentConfig::defaults(mode).to_json());
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(manifests) => {
            let mut ok = true;
            for m in &manifests {
                eprintln!("{}: {} files in {:.1} s", m.config.output.display(), m.outputs.len(), m.wall_time_seconds);
                for w in &m.warnings {
                    eprintln!("warning: {w}");
                }
                for f in &m.failures {
                    eprintln!("failed: {}: {}", f.point, f.error);
                    ok = false;
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
