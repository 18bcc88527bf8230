//! Configuration documents: a `[machine]` table with the machine parameters
//! and an optional `[solver]` table naming the strategies to use.

use std::path::Path;

use serde::{Deserialize, Serialize};

use hmortar::MachineConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Saddle-point strategy, `schur` or `monolithic`.
    pub strategy: String,
    /// Subdomain solver, `cholesky` or `cg`.
    pub backend: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            strategy: "schur".into(),
            backend: "cholesky".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub machine: MachineConfig,
    pub solver: SolverSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.message().trim().to_string()))?;
        cfg.machine.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
