//! Service configuration: `key = value` lines.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::DEFAULT_CAPABILITY_LIFETIME;

/// Environment variable overriding the trusted root directory.
pub const TRUSTED_ROOT_ENV: &str = "AKENTI_TRUSTED_ROOT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("config line {line}: {detail}")]
    Bad { line: usize, detail: String },
    #[error("config missing required key {0:?}")]
    Missing(&'static str),
    #[error("trusted root directory {0}: {1}")]
    BadTrustedRoot(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: String,
    pub trusted_root_dir: PathBuf,
    pub engine_key: PathBuf,
    pub capability_lifetime_s: u64,
    pub log_level: String,
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut listen = None;
        let mut trusted_root_dir = None;
        let mut engine_key = None;
        let mut capability_lifetime_s = DEFAULT_CAPABILITY_LIFETIME;
        let mut log_level = "info".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| ConfigError::Bad {
                line: i + 1,
                detail,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".to_string()))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "listen" => listen = Some(value.to_string()),
                "trusted_root_dir" => trusted_root_dir = Some(PathBuf::from(value)),
                "engine_key" => engine_key = Some(PathBuf::from(value)),
                "capability_lifetime" => {
                    capability_lifetime_s = value
                        .parse()
                        .map_err(|_| err(format!("bad capability_lifetime {value:?}")))?;
                }
                "log_level" => log_level = value.to_string(),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let mut config = ServiceConfig {
            listen: listen.ok_or(ConfigError::Missing("listen"))?,
            trusted_root_dir: trusted_root_dir.ok_or(ConfigError::Missing("trusted_root_dir"))?,
            engine_key: engine_key.ok_or(ConfigError::Missing("engine_key"))?,
            capability_lifetime_s,
            log_level,
        };
        if let Ok(dir) = std::env::var(TRUSTED_ROOT_ENV) {
            if !dir.is_empty() {
                config.trusted_root_dir = PathBuf::from(dir);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        ServiceConfig::parse(&text)
    }

    /// The trusted root directory must exist and hold at least one
    /// policy certificate.
    pub fn validate_trusted_root(&self) -> Result<(), ConfigError> {
        let dir = &self.trusted_root_dir;
        let bad = |detail: String| {
            ConfigError::BadTrustedRoot(dir.display().to_string(), detail)
        };
        let entries = std::fs::read_dir(dir).map_err(|e| bad(e.to_string()))?;
        for entry in entries.filter_map(|e| e.ok()) {
            let path = entry.path();
            if path.extension().is_none_or(|ext| ext != "xml") {
                continue;
            }
            if let Ok(text) = std::fs::read_to_string(&path) {
                if let Ok(cert) = crate::cert::parse_certificate(&text) {
                    if cert.as_policy().is_some() {
                        return Ok(());
                    }
                }
            }
        }
        Err(bad("contains no policy certificate".to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_defaults() {
        let config = ServiceConfig::parse(
            "# engine\nlisten = 127.0.0.1:7468\ntrusted_root_dir = /tmp/policy\nengine_key = /tmp/engine.key\n",
        )
        .unwrap();
        assert_eq!(config.listen, "127.0.0.1:7468");
        assert_eq!(config.capability_lifetime_s, DEFAULT_CAPABILITY_LIFETIME);
        assert_eq!(config.log_level, "info");
    }

    #[test]
    fn rejects_unknown_and_missing() {
        assert!(ServiceConfig::parse("listen = x\nwhat = y\n").is_err());
        assert!(matches!(
            ServiceConfig::parse("listen = x\nengine_key = k\n"),
            Err(ConfigError::Missing("trusted_root_dir"))
        ));
        assert!(ServiceConfig::parse("listen 127.0.0.1\n").is_err());
    }
}
