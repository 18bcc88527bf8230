use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hmortar_cli::{run, CliError, ConfigFile, GridSpec, Mode, RunSpec};

/// Harmonic mortar magnetostatics for rotating machines.
#[derive(Parser)]
#[command(name = "hmortar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with `[machine]` and `[solver]` tables; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Saddle-point strategy, overriding the config (`schur`, `monolithic`).
    #[arg(long)]
    strategy: Option<String>,
    /// Subdomain solver, overriding the config (`cholesky`, `cg`).
    #[arg(long)]
    backend: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one rotor angle.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        alpha_deg: f64,
        /// Write VTK files with the potential and |grad a|.
        #[arg(long)]
        export_fields: bool,
    },
    /// Torque over a uniform grid of rotor angles (stop excluded).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        start_deg: f64,
        #[arg(long, allow_negative_numbers = true)]
        stop_deg: f64,
        #[arg(long)]
        count: usize,
        /// Skip the symmetry report.
        #[arg(long)]
        no_symmetry: bool,
    },
    /// Run the self-checks on a configuration.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_coupling: f64,
    },
}

fn load(common: &Common) -> Result<ConfigFile, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(s) = &common.strategy {
        cfg.solver.strategy = s.clone();
    }
    if let Some(b) = &common.backend {
        cfg.solver.backend = b.clone();
    }
    Ok(cfg)
}

fn spec(cli: Cli) -> Result<RunSpec, CliError> {
    let (common, mode) = match cli.command {
        Command::Simulate {
            common,
            alpha_deg,
            export_fields,
        } => (common, Mode::Simulate { alpha_deg, export_fields }),
        Command::Sweep {
            common,
            start_deg,
            stop_deg,
            count,
            no_symmetry,
        } => (
            common,
            Mode::Sweep {
                grid: GridSpec {
                    start_deg,
                    stop_deg,
                    count,
                },
                symmetry_report: !no_symmetry,
            },
        ),
        Command::Verify { common, perturb_coupling } => (common, Mode::Verify { perturb_coupling }),
    };
    Ok(RunSpec {
        config: load(&common)?,
        out_dir: common.out,
        mode,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match spec(Cli::parse()).and_then(|s| run(&s)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
