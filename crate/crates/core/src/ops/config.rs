//! The JSON configuration file read by the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runtime::RuntimeConfig;
use crate::error::{Error, Result};
use crate::gateway::RetryPolicy;
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    /// Upstream the runtime reads from and writes forecasts to.
    pub url: String,
    pub retry: RetryPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            bind: "127.0.0.1:8080".into(),
            data_dir: "gateway".into(),
            url: "http://127.0.0.1:8080".into(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadcastConfig {
    pub seed: u64,
    /// Days of synthetic history for `simulate`.
    pub days: i64,
    pub synthetic: SyntheticConfig,
    /// Dataset directory (manifest plus CSVs).
    pub data_dir: PathBuf,
    pub registry_dir: PathBuf,
    pub run_log: PathBuf,
    pub gateway: GatewayConfig,
    pub runtime: RuntimeConfig,
}

impl Default for LoadcastConfig {
    fn default() -> Self {
        LoadcastConfig {
            seed: 7,
            days: 365,
            synthetic: SyntheticConfig::default(),
            data_dir: "data".into(),
            registry_dir: "registry".into(),
            run_log: "runlog.jsonl".into(),
            gateway: GatewayConfig::default(),
            runtime: RuntimeConfig::default(),
        }
    }
}

impl LoadcastConfig {
    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let mut cfg: LoadcastConfig =
            serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.data_dir, &mut cfg.registry_dir, &mut cfg.run_log, &mut cfg.gateway.data_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.days < 1 {
            return Err(Error::invalid("days must be >= 1"));
        }
        self.runtime.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
