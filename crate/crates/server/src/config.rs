use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServerError;

/// Server settings. Read from a TOML file; every key can be overridden by
/// an environment variable (`MUSHRA_BIND`, `MUSHRA_PORT`, `MUSHRA_DATA_DIR`,
/// `MUSHRA_AUDIO_ROOT`, `MUSHRA_ADMIN_TOKEN`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    /// 0 picks a free port.
    pub port: u16,
    pub data_dir: PathBuf,
    /// Catalog root: `<audio_root>/<system>/<utterance>.wav`.
    pub audio_root: PathBuf,
    /// Bearer token for `/campaigns` and `/admin/*`. Admin routes refuse
    /// every request when unset.
    pub admin_token: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            audio_root: PathBuf::from("audio"),
            admin_token: None,
        }
    }
}

impl Config {
    /// File (optional) then process environment.
    pub fn load(path: Option<&Path>) -> Result<Config, ServerError> {
        Config::from_sources(path, |k| std::env::var(k).ok())
    }

    pub fn from_sources<F>(path: Option<&Path>, env: F) -> Result<Config, ServerError>
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| mushra_core::Error::io(p, e))?;
                toml::from_str(&text)
                    .map_err(|e| ServerError::Config(format!("{}: {e}", p.display())))?
            }
            None => Config::default(),
        };
        if let Some(v) = env("MUSHRA_BIND") {
            config.bind = v;
        }
        if let Some(v) = env("MUSHRA_PORT") {
            config.port = v
                .parse()
                .map_err(|_| ServerError::Config(format!("MUSHRA_PORT={v:?} is not a port")))?;
        }
        if let Some(v) = env("MUSHRA_DATA_DIR") {
            config.data_dir = v.into();
        }
        if let Some(v) = env("MUSHRA_AUDIO_ROOT") {
            config.audio_root = v.into();
        }
        if let Some(v) = env("MUSHRA_ADMIN_TOKEN") {
            config.admin_token = Some(v);
        }
        if config.admin_token.as_deref() == Some("") {
            config.admin_token = None;
        }
        Ok(config)
    }
}
