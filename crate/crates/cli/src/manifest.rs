//! Run manifests written beside every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// Arguments of the producing command, without the program name.
    pub command: Vec<String>,
    /// The fully materialised configuration, seeds included.
    pub config: ExperimentConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: &[String], config: &ExperimentConfig) -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_vec(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// `<output>.manifest.json`, pretty-printed.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    /// Writes one manifest per output.
    pub fn write(&self) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self)?;
        for out in &self.outputs {
            std::fs::write(Self::path_for(out), format!("{json}\n"))?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Manifest> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
