//! Run manifests: everything needed to reproduce a result file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use extremum_tde::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::output::Format;

/// Fully resolved experiment, tagged by the command that runs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate {
        experiment: ExperimentConfig,
    },
    SweepK {
        experiment: ExperimentConfig,
        k_list: Vec<u32>,
    },
    SweepSnr {
        experiment: ExperimentConfig,
        snr_db_list: Vec<f64>,
    },
}

impl RunConfig {
    pub fn command(&self) -> &'static str {
        match self {
            RunConfig::Simulate { .. } => "simulate",
            RunConfig::SweepK { .. } => "sweep-k",
            RunConfig::SweepSnr { .. } => "sweep-snr",
        }
    }

    pub fn experiment(&self) -> &ExperimentConfig {
        match self {
            RunConfig::Simulate { experiment }
            | RunConfig::SweepK { experiment, .. }
            | RunConfig::SweepSnr { experiment, .. } => experiment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub master_seed: u64,
    pub format: Format,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(config: RunConfig, format: Format, outputs: Vec<PathBuf>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.experiment().master_seed,
            config,
            format,
            timestamp,
            outputs,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// `results.csv` -> `results.csv.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use extremum_tde::{EstimatorId, ModelParams, TrialBudget};

    #[test]
    fn roundtrip() {
        let exp = ExperimentConfig::new(
            ModelParams::new(20.0, 150, 8).unwrap(),
            vec![EstimatorId::Mmie, EstimatorId::RdCce],
            TrialBudget::Fixed { trials: 10 },
            3,
        );
        let m = RunManifest::new(
            RunConfig::SweepSnr {
                experiment: exp,
                snr_db_list: vec![0.0, 12.5],
            },
            Format::Csv,
            vec!["a.csv".into()],
        );
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"command\":\"sweep_snr\""));
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.master_seed, 3);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            manifest_path(Path::new("out/r.csv")),
            PathBuf::from("out/r.csv.manifest.json")
        );
    }
}
