//! Run configuration: JSON with a `schema_version`, unknown fields rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use valguard::engine::{PermutedBlock, PipelineSpec};
use valguard::pls::SelectionSpec;
use valguard::simgen::ScenarioSpec;
use valguard::ColumnRef;

use crate::error::CliError;

pub const CONFIG_SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u64,
    /// Seeds data generation and every pipeline; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: Option<DataSource>,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    pub pipelines: Vec<PipelineSpec>,
    #[serde(default)]
    pub permutation: PermutationConfig,
    /// Bootstrap of the per-repetition metrics.
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub demonstrate_leakage: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    /// CSV file, relative to the config file's directory.
    pub path: PathBuf,
    pub y_cols: Vec<ColumnRef>,
    #[serde(default)]
    pub group_col: Option<ColumnRef>,
    #[serde(default)]
    pub time_col: Option<ColumnRef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermutationConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_n_perm")]
    pub n_perm: usize,
    #[serde(default = "default_block")]
    pub block: PermutedBlock,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n_perm: default_n_perm(),
            block: default_block(),
        }
    }
}

fn default_n_perm() -> usize {
    99
}

fn default_block() -> PermutedBlock {
    PermutedBlock::Y
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_boot: usize,
}

/// Output locations, relative to the `--out` directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_report")]
    pub report_path: PathBuf,
    #[serde(default = "default_curves")]
    pub curves_dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            report_path: default_report(),
            curves_dir: default_curves(),
        }
    }
}

fn default_report() -> PathBuf {
    "report.json".into()
}

fn default_curves() -> PathBuf {
    "curves".into()
}

/// Loads a config file and checks it.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON: {e}")))?;
    match value.get("schema_version") {
        None => return Err(CliError::config("schema_version: missing")),
        Some(v) if v.as_u64() != Some(CONFIG_SCHEMA_VERSION) => {
            return Err(CliError::config(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, found {v}"
            )))
        }
        Some(_) => {}
    }
    // Pipelines inherit the top-level seed so that every pair is comparable.
    if let Some(list) = value.get("pipelines").and_then(Value::as_array) {
        if let Some(i) = list.iter().position(|p| p.get("seed").is_some()) {
            return Err(CliError::config(format!(
                "pipelines[{i}].seed: set the top-level \"seed\" instead"
            )));
        }
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(format!("{path}: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn file_safe(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.')
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.data, &self.scenario) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "data, scenario: give exactly one data source, not both",
                ))
            }
            (None, None) => return Err(CliError::config("data, scenario: one of them is required")),
            (Some(d), None) if d.y_cols.is_empty() => {
                return Err(CliError::config("data.y_cols: at least one Y column is required"))
            }
            _ => {}
        }
        if self.pipelines.is_empty() {
            return Err(CliError::config("pipelines: at least one pipeline is required"));
        }
        let mut names = BTreeSet::new();
        for (i, p) in self.pipelines.iter().enumerate() {
            if !file_safe(&p.name) {
                return Err(CliError::config(format!(
                    "pipelines[{i}].name: \"{}\" must be non-empty ASCII letters, digits, '-', '_' or '.'",
                    p.name
                )));
            }
            if !names.insert(p.name.as_str()) {
                return Err(CliError::config(format!(
                    "pipelines[{i}].name: \"{}\" is used twice",
                    p.name
                )));
            }
            p.validate().map_err(|e| {
                let msg = match e {
                    valguard::Error::InvalidArgument(m) => m,
                    other => other.to_string(),
                };
                CliError::config(format!("pipelines[{i}].{msg}"))
            })?;
            if self.demonstrate_leakage {
                if p.selection_grid.iter().all(|s| *s == SelectionSpec::None) {
                    return Err(CliError::config(format!(
                        "pipelines[{i}].selection_grid: leakage demonstration needs a selection method"
                    )));
                }
                if p.n_lv_grid.iter().all(|&a| a == 0) {
                    return Err(CliError::config(format!(
                        "pipelines[{i}].n_lv_grid: leakage demonstration needs a positive entry"
                    )));
                }
            }
            if self.bootstrap.is_some() && p.n_repetitions < 2 {
                return Err(CliError::config(format!(
                    "pipelines[{i}].n_repetitions: bootstrap needs at least 2 repetitions"
                )));
            }
        }
        if self.permutation.enabled && self.permutation.n_perm == 0 {
            return Err(CliError::config("permutation.n_perm: must be at least 1"));
        }
        if self.bootstrap.as_ref().is_some_and(|b| b.n_boot == 0) {
            return Err(CliError::config("bootstrap.n_boot: must be at least 1"));
        }
        Ok(())
    }
}
