use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const PORT_ENV: &str = "DOSEWISE_PORT";
pub const DATA_DIR_ENV: &str = "DOSEWISE_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub host: String,
    pub port: u16,
    /// Root of the trace and job store.
    pub data_dir: PathBuf,
    /// Where scenario, field, subject and route assets are looked up.
    /// Defaults to `<data_dir>/assets`.
    pub assets_dir: Option<PathBuf>,
    pub max_body_bytes: usize,
    /// Optimizations with more candidates than this run as background jobs.
    pub sync_evaluation_limit: usize,
    /// Concurrent optimization runs.
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            assets_dir: None,
            max_body_bytes: 8 * 1024 * 1024,
            sync_evaluation_limit: 50_000,
            workers: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::File { path: "<inline>".into(), message: e.to_string() })
    }

    /// Reads the optional config file, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::File { path: p.display().to_string(), message: e.to_string() })?;
                toml::from_str(&text).map_err(|e| ConfigError::File { path: p.display().to_string(), message: e.to_string() })?
            }
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(port) = get(PORT_ENV) {
            self.port = port.trim().parse().map_err(|e| ConfigError::Env { name: PORT_ENV, message: format!("{e}") })?;
        }
        if let Some(dir) = get(DATA_DIR_ENV) {
            self.data_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be >= 1".into()));
        }
        if self.max_body_bytes == 0 {
            return Err(ConfigError::Invalid("max_body_bytes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn assets_dir(&self) -> PathBuf {
        self.assets_dir.clone().unwrap_or_else(|| self.data_dir.join("assets"))
    }
}
