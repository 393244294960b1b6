//! Settings file plus environment overrides.
//!
//! ```toml
//! store = "cra.db"
//! model = "model.cra"
//! seed = 42
//! log_level = "info"
//!
//! [miner]
//! base_url = "https://review.example.org"
//! username = "bot"
//! password_env = "CRA_GERRIT_PASSWORD"
//!
//! [server]
//! deep_link_template = "https://review.example.org/c/{change_id}/#{comment_id}"
//! users = [{ id = "alice", password_sha256 = "...", admin = true }]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cra_core::ingest::gerrit::MinerConfig;
use cra_core::pipeline::DEFAULT_SEED;
use cra_server::ApiConfig;

pub const CONFIG_ENV: &str = "CRA_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "cra.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default = "default_store")]
    pub store: PathBuf,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_log_level")]
    pub log_level: String,
    /// Directory with replacement word lists; built-in lists otherwise.
    #[serde(default)]
    pub lexicon_dir: Option<PathBuf>,
    #[serde(default)]
    pub miner: Option<MinerConfig>,
    #[serde(default)]
    pub server: ApiConfig,
}

fn default_store() -> PathBuf {
    PathBuf::from("cra.db")
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_log_level() -> String {
    "warn".into()
}

impl Default for CliConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid settings in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{var} must be {expected}, got {value:?}")]
    BadOverride { var: &'static str, expected: &'static str, value: String },
}

impl CliConfig {
    /// Reads `explicit`, else the file named by `CRA_CONFIG`, else
    /// `cra.toml` when present, then applies environment overrides.
    pub fn load(explicit: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<CliConfig, ConfigError> {
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| env(CONFIG_ENV).map(PathBuf::from))
            .or_else(|| Some(PathBuf::from(DEFAULT_CONFIG_FILE)).filter(|p| p.exists()));
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse { path, message: e.message().to_string() })?
            }
            None => CliConfig::default(),
        };
        config.apply_env(env)?;
        Ok(config)
    }

    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = env("CRA_STORE") {
            self.store = v.into();
        }
        if let Some(v) = env("CRA_MODEL") {
            self.model = Some(v.into());
        }
        if let Some(v) = env("CRA_SEED") {
            self.seed = v.parse().map_err(|_| ConfigError::BadOverride {
                var: "CRA_SEED",
                expected: "an unsigned integer",
                value: v,
            })?;
        }
        if let Some(v) = env("CRA_LOG") {
            self.log_level = v;
        }
        if let Some(url) = env("CRA_GERRIT_URL") {
            match &mut self.miner {
                Some(m) => m.base_url = url,
                None => self.miner = Some(MinerConfig::new(url)),
            }
        }
        if let Some(user) = env("CRA_GERRIT_USER") {
            if let Some(m) = &mut self.miner {
                m.username = Some(user);
            }
        }
        Ok(())
    }
}
