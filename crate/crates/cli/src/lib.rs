//! Simulate, sweep and verify workflows behind the `hmortar` binary.
//!
//! Every output is a function of the configuration and the run arguments
//! only; no timestamps or host details are written into data files.

pub mod config;
pub mod output;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ConfigFile, SolverSection};
pub use output::{run_simulate, SimulateSummary};
pub use sweep::{run_sweep, SweepOutcome};
pub use verify::{run_verify, CheckResult, VerifyReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] hmortar::Error),

    #[error("invalid arguments: {0}")]
    Arguments(String),

    #[error("{0}")]
    Failed(String),
}

/// Angular grid `start + i (stop − start) / count`, `i = 0..count`, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.count < 2 {
            return Err(CliError::Arguments(format!("grid count must be at least 2, got {}", self.count)));
        }
        if !self.start_deg.is_finite() || !self.stop_deg.is_finite() || self.stop_deg <= self.start_deg {
            return Err(CliError::Arguments(format!(
                "grid needs finite start < stop, got {} .. {}",
                self.start_deg, self.stop_deg
            )));
        }
        Ok(())
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        hmortar::diagnostics::uniform_grid(self.start_deg, self.stop_deg, self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Simulate { alpha_deg: f64, export_fields: bool },
    Sweep { grid: GridSpec, symmetry_report: bool },
    Verify { perturb_coupling: f64 },
}

/// One invocation: what to run, on which configuration, and where to write.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub config: ConfigFile,
    pub out_dir: Option<PathBuf>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.mode {
            Mode::Simulate { alpha_deg, .. } if !alpha_deg.is_finite() => {
                Err(CliError::Arguments(format!("alpha must be finite, got {alpha_deg}")))
            }
            Mode::Sweep { grid, .. } => grid.validate(),
            _ => Ok(()),
        }
    }
}

pub(crate) fn write_file(dir: &std::path::Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |source| CliError::Io {
        path: dir.join(name).display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(io)?;
    Ok(path)
}

/// Runs one workflow. `Ok(false)` means it completed but something failed
/// (a check, or an angle of a sweep) and the process should exit nonzero.
pub fn run(spec: &RunSpec) -> Result<bool, CliError> {
    spec.validate()?;
    match &spec.mode {
        Mode::Simulate { alpha_deg, export_fields } => {
            let summary = run_simulate(&spec.config, *alpha_deg, *export_fields, spec.out_dir.as_deref())?;
            println!(
                "alpha = {} deg: torque = {:.9e} N m, energy = {:.9e} J/m",
                alpha_deg, summary.torque_nm, summary.energy_j_per_m
            );
            Ok(true)
        }
        Mode::Sweep { grid, symmetry_report } => {
            let out = run_sweep(&spec.config, grid, *symmetry_report, spec.out_dir.as_deref())?;
            println!(
                "{} angles, {} failed, {} sparse factorizations",
                out.curve.alphas.len(),
                out.failures.len(),
                out.factorizations
            );
            for (alpha, msg) in &out.failures {
                eprintln!("alpha = {alpha} deg: {msg}");
            }
            Ok(out.failures.is_empty())
        }
        Mode::Verify { perturb_coupling } => {
            let report = run_verify(&spec.config, *perturb_coupling, spec.out_dir.as_deref())?;
            for c in &report.checks {
                println!("{} {}: {}", c.status.label(), c.name, c.detail);
            }
            Ok(report.passed())
        }
    }
}
