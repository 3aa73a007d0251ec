//! Command-line entry point for the tunable-coupler parametric-gate
//! simulator.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use couplersim_cli::{run, Command, RunContext};

#[derive(Parser)]
#[command(
    name = "couplersim",
    about = "Simulator and error-analysis toolkit for a parametric iSWAP gate on a tunable-coupler transmon pair",
    version
)]
struct Cli {
    /// Configuration file (JSON); the bundled reference device when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV / metadata / plot-script artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured shot count ("exact" or an integer).
    #[arg(long, global = true)]
    shots: Option<String>,

    /// Worker threads for sweep cells (defaults to the core count).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Effective coupling J12 and its flux derivatives over the dispersive branch.
    J12Sweep {
        #[arg(long, default_value_t = 121)]
        points: usize,
    },
    /// Static ZZ coupling over the dispersive branch (exact diagonalization).
    ZzSweep {
        #[arg(long, default_value_t = 81)]
        points: usize,
        #[arg(long, default_value_t = 3)]
        n_levels: usize,
    },
    /// Population chevron around the parametric resonance at one operating point.
    Chevron {
        /// Operating-point index into the config list.
        #[arg(long, default_value_t = 0)]
        point: usize,
        #[arg(long, default_value_t = 6.0)]
        span_mhz: f64,
        #[arg(long, default_value_t = 21)]
        n_freq: usize,
        #[arg(long, default_value_t = 450.0)]
        t_max_ns: f64,
        #[arg(long, default_value_t = 181)]
        n_time: usize,
    },
    /// Static-flux swap spectroscopy over a coupler-frequency range.
    SwapSpec {
        #[arg(long, default_value_t = 5.40)]
        freq_min_ghz: f64,
        #[arg(long, default_value_t = 5.80)]
        freq_max_ghz: f64,
        #[arg(long, default_value_t = 17)]
        n_freq: usize,
        #[arg(long, default_value_t = 600.0)]
        t_max_ns: f64,
        #[arg(long, default_value_t = 256)]
        n_time: usize,
    },
    /// Quantum process tomography of the calibrated gate at one operating point.
    Qpt {
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Calibrate and characterize all configured operating points.
    ErrorBudget,
    /// Gate-repetition QPT fidelity decay and its two-parameter fit.
    DecayFit {
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Largest (odd) gate count.
        #[arg(long, default_value_t = 9)]
        n_max: u32,
    },
    /// Calibrate the parametric pulse at one operating point.
    Calibrate {
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Print the bundled reference configuration as JSON.
    Config,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to configure the worker pool")?;
    }

    let command = match cli.command {
        Commands::J12Sweep { points } => Command::J12Sweep { points },
        Commands::ZzSweep { points, n_levels } => Command::ZzSweep { points, n_levels },
        Commands::Chevron { point, span_mhz, n_freq, t_max_ns, n_time } => {
            Command::Chevron { point, span_mhz, n_freq, t_max_ns, n_time }
        }
        Commands::SwapSpec { freq_min_ghz, freq_max_ghz, n_freq, t_max_ns, n_time } => {
            Command::SwapSpec { freq_min_ghz, freq_max_ghz, n_freq, t_max_ns, n_time }
        }
        Commands::Qpt { point } => Command::Qpt { point },
        Commands::ErrorBudget => Command::ErrorBudget,
        Commands::DecayFit { point, n_max } => Command::DecayFit { point, n_max },
        Commands::Calibrate { point } => Command::Calibrate { point },
        Commands::Config => Command::EmitConfig,
    };

    let mut ctx = RunContext::load(cli.config.as_deref(), &cli.out)
        .with_context(|| format!("loading configuration for `{}`", command.name()))?;
    if let Some(seed) = cli.seed {
        ctx.config.seed = Some(seed);
    }
    if let Some(shots) = &cli.shots {
        ctx.config.shots = if shots == "exact" {
            couplersim::config::Shots::Exact
        } else {
            couplersim::config::Shots::Finite(
                shots.parse().context("--shots must be an integer or \"exact\"")?,
            )
        };
        ctx.config.validate().context("overridden configuration is invalid")?;
    }

    let files = run(&ctx, &command)
        .with_context(|| format!("running `{}`", command.name()))?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
