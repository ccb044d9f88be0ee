//! Pipeline configuration: one TOML file, validated up front, with unknown
//! keys rejected. The only environment override is the API key
//! (`PARLENS_API_KEY`), read by the HTTP backend itself.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::Mode;
use crate::harness::ParserTarget;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config `{path}`: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config `{path}`: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Protocol name used in report headers.
    pub protocol: String,
    /// RFC plain-text input.
    pub rfc: PathBuf,
    /// Directory receiving all stage artifacts.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub generate: GenerateConfig,
    /// Parser under test; required for the run/triage/report stages.
    pub target: Option<ParserTarget>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub mode: Mode,
    /// JSONL exchange fixtures; required in record and replay modes.
    pub fixtures: Option<PathBuf>,
    /// Chat-completion endpoint, required in live and record modes.
    pub base_url: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    /// Element counts tried for each variable-length array.
    #[serde(default = "default_array_counts")]
    pub array_counts: Vec<u64>,
    /// Maximum number of enumerated paths before erroring out.
    #[serde(default = "default_path_cap")]
    pub path_cap: usize,
    /// Per-query solver budget.
    #[serde(default = "default_solver_timeout_ms")]
    pub solver_timeout_ms: u64,
    /// Harness worker pool size; 0 means one per CPU.
    #[serde(default)]
    pub workers: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            array_counts: default_array_counts(),
            path_cap: default_path_cap(),
            solver_timeout_ms: default_solver_timeout_ms(),
            workers: 0,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_array_counts() -> Vec<u64> {
    vec![0, 1]
}

fn default_path_cap() -> usize {
    10_000
}

fn default_solver_timeout_ms() -> u64 {
    10_000
}

impl PipelineConfig {
    /// Loads and validates a config file. Relative paths inside the file are
    /// resolved against the file's own directory, so a fixture bundle works
    /// from any working directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.rfc = resolve(base, &cfg.rfc);
        cfg.out_dir = resolve(base, &cfg.out_dir);
        if let Some(fx) = cfg.gateway.fixtures.take() {
            cfg.gateway.fixtures = Some(resolve(base, &fx));
        }
        if let Some(t) = cfg.target.as_mut() {
            t.command = resolve(base, &t.command);
        }
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let invalid = |message: String| ConfigError::Invalid { path: path.to_path_buf(), message };
        match self.gateway.mode {
            Mode::Replay | Mode::Record => {
                if self.gateway.fixtures.is_none() {
                    return Err(invalid(format!(
                        "gateway.fixtures is required in {:?} mode",
                        self.gateway.mode
                    )));
                }
            }
            Mode::Live => {}
        }
        if matches!(self.gateway.mode, Mode::Live | Mode::Record)
            && (self.gateway.base_url.is_none() || self.gateway.model.is_none())
        {
            return Err(invalid(
                "gateway.base_url and gateway.model are required in live and record modes".into(),
            ));
        }
        if self.generate.array_counts.is_empty() {
            return Err(invalid("generate.array_counts must not be empty".into()));
        }
        if self.generate.path_cap == 0 {
            return Err(invalid("generate.path_cap must be positive".into()));
        }
        if self.generate.solver_timeout_ms == 0 {
            return Err(invalid("generate.solver_timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
