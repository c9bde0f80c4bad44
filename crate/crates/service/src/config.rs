use std::path::{Path, PathBuf};

use dramaturg_core::llm::BackendSpec;
use dramaturg_core::session::EngineConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigLoadError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {var}: {message}")]
    Env { var: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Backend for sessions that do not pick their own.
    pub backend: BackendSpec,
    /// Advance every running session by one tick at this interval. Sessions
    /// only move on explicit advance requests when unset.
    pub autoplay_ms: Option<u64>,
    /// Where play records are checkpointed, one file per session.
    pub checkpoint_dir: Option<PathBuf>,
    /// Checkpoint after this many ticks since the last one, and on finish.
    pub checkpoint_every: u64,
    /// Extra `*.toml` scripts, registered by file stem next to `demo`.
    pub scripts_dir: Option<PathBuf>,
    /// A streaming client that cannot take a frame within this time is
    /// disconnected.
    pub send_timeout_ms: u64,
    /// Upper bound on ticks per advance request.
    pub max_advance: usize,
    /// Defaults for new sessions; requests may override any field.
    pub engine: EngineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            backend: BackendSpec::default(),
            autoplay_ms: None,
            checkpoint_dir: None,
            checkpoint_every: 10,
            scripts_dir: None,
            send_timeout_ms: 5_000,
            max_advance: 1_000,
            engine: EngineConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Defaults, then the TOML file if given, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigLoadError> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigLoadError::Io {
                    path: path.into(),
                    source,
                })?;
                toml::from_str(&text).map_err(|source| ConfigLoadError::Toml {
                    path: path.into(),
                    source,
                })?
            }
            None => ServiceConfig::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    /// Overrides from `DRAMATURG_BIND`, `DRAMATURG_BACKEND`,
    /// `DRAMATURG_AUTOPLAY_MS`, `DRAMATURG_CHECKPOINT_DIR` and
    /// `DRAMATURG_SCRIPTS_DIR`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigLoadError> {
        if let Some(v) = lookup("DRAMATURG_BIND") {
            self.bind = v;
        }
        if let Some(v) = lookup("DRAMATURG_BACKEND") {
            self.backend = BackendSpec::parse(&v).map_err(|message| ConfigLoadError::Env {
                var: "DRAMATURG_BACKEND",
                message,
            })?;
        }
        if let Some(v) = lookup("DRAMATURG_AUTOPLAY_MS") {
            let ms = v.parse().map_err(|_| ConfigLoadError::Env {
                var: "DRAMATURG_AUTOPLAY_MS",
                message: format!("`{v}` is not a number of milliseconds"),
            })?;
            self.autoplay_ms = (ms > 0).then_some(ms);
        }
        if let Some(v) = lookup("DRAMATURG_CHECKPOINT_DIR") {
            self.checkpoint_dir = Some(v.into());
        }
        if let Some(v) = lookup("DRAMATURG_SCRIPTS_DIR") {
            self.scripts_dir = Some(v.into());
        }
        Ok(())
    }
}
