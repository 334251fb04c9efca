//! TOML experiment configuration. Every field is optional; command-line
//! flags take precedence over values read from the file.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub massart: MassartSection,
    #[serde(default)]
    pub colored: ColoredSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub preset: Option<String>,
    /// Explicit environment values; overrides `preset`.
    pub envs: Option<Vec<f64>>,
    pub scaling: Option<String>,
    pub n: Option<usize>,
    pub d: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub method: Option<String>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub m: Option<f64>,
    #[serde(rename = "E")]
    pub e: Option<usize>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassartSection {
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "E")]
    pub e: Option<usize>,
    pub m: Option<f64>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub trials: Option<usize>,
    pub mode: Option<String>,
    pub tilt: Option<f64>,
    pub x2_fraction: Option<f64>,
    pub beta_grid: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColoredSection {
    pub train_e: Option<Vec<f64>>,
    pub test_e: Option<f64>,
    pub n: Option<usize>,
    pub steps: Option<usize>,
    pub lr: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub e1: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub e_test: Option<f64>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub steps: Option<usize>,
    pub lr: Option<f64>,
}

/// Invalid configuration or flag values.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load(path: Option<&Path>) -> anyhow::Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::Error::new(ConfigError(format!("invalid config {}: {e}", path.display()))))
}
