//! Run report written next to every command's outputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioSummary>,
}

#[derive(Debug, Default, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub offset_c: f64,
    pub rated_days: usize,
    pub failed_days: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winter_mean_mva: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summer_mean_mva: Option<f64>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("run_report.toml");
        let text = toml::to_string_pretty(self).context("serializing run report")?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
