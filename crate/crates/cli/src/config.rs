//! Run configuration: defaults, config-file values, and flag overrides.
//!
//! Precedence is flags > config file > defaults. The resolved configuration
//! is embedded verbatim in every output file, and `--config` accepts either
//! a bare configuration object or a previous output file (whose `config`
//! field is then reused), so any result can be reproduced byte-for-byte.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Union of the per-subcommand parameters; unused fields stay None and are
/// skipped during serialisation.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct StoredConfig {
    pub subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_eigs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacings: Option<Vec<f64>>,
}

impl StoredConfig {
    /// Load from a JSON file; accepts either a bare config object or a
    /// previous output file carrying a `config` field.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).context("config file is not valid JSON")?;
        let object = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(object).context("config object has unexpected shape")
    }

    pub fn check_subcommand(&self, expected: &str) -> anyhow::Result<()> {
        if !self.subcommand.is_empty() && self.subcommand != expected {
            bail!(
                "config file is for subcommand '{}', not '{expected}'",
                self.subcommand
            );
        }
        Ok(())
    }
}

/// Parse a comma-separated list of numbers.
pub fn parse_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid number '{part}'"))
        })
        .collect()
}
