use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hotspot::commands;
use hotspot::config::{Config, Overrides};
use hotspot::error::{exit, CliError, Result};

/// Burglary hotspot simulations: continuum model, lattice model, parameter
/// sweeps and post-processing.
#[derive(Parser, Debug)]
#[command(name = "hotspot", version)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true, env = "HOTSPOT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration, layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for initial-condition noise and the stochastic engine.
    #[arg(long)]
    seed: Option<u64>,
    /// Built-in parameter set: case1, case2, case3, case2-piecewise-eta,
    /// highway-square, chicago-like.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the continuum model.
    PdeRun {
        #[command(flatten)]
        common: Common,
    },
    /// Run the lattice agent model.
    AbmRun {
        #[command(flatten)]
        common: Common,
        /// Use the stochastic engine (overrides abm.engine).
        #[arg(long)]
        stochastic: bool,
    },
    /// Independent continuum runs over a list of eta values, with fits.
    SweepEta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated eta values (overrides sweep.etas).
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
    },
    /// Hotspot report for a VTK snapshot, or fits for a sweep CSV.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// A `.vtk` snapshot or a `sweep.csv`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Write the configured mesh as text and VTK.
    MeshGen {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<Config> {
    Config::load(
        common.config.as_deref(),
        &Overrides {
            preset: common.preset.clone(),
            seed: common.seed,
            out: common.out.clone(),
        },
    )
}

fn print<T: serde::Serialize>(value: &T) {
    if let Ok(text) = serde_json::to_string_pretty(value) {
        println!("{text}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::PdeRun { common } => {
            let cfg = load(&common)?;
            print(&commands::pde_run(&cfg, &cfg.output.dir)?);
        }
        Command::AbmRun { common, stochastic } => {
            let mut cfg = load(&common)?;
            if stochastic {
                cfg.abm.engine = hotspot::config::EngineName::Stochastic;
            }
            print(&commands::abm_run(&cfg, &cfg.output.dir)?);
        }
        Command::SweepEta { common, etas } => {
            let cfg = load(&common)?;
            let etas = etas.unwrap_or_else(|| cfg.sweep.etas.clone());
            print(&commands::sweep_eta(&cfg, &etas, &cfg.output.dir)?);
        }
        Command::Analyze { common, input } => {
            let cfg = load(&common)?;
            if input.extension().is_some_and(|e| e == "csv") {
                print(&commands::analyze_sweep(&cfg, &input, &cfg.output.dir)?);
            } else {
                print(&commands::analyze(&cfg, &input, &cfg.output.dir)?);
            }
        }
        Command::MeshGen { common } => {
            let cfg = load(&common)?;
            print(&commands::mesh_gen(&cfg, &cfg.output.dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
