//! Run configuration.
//!
//! One JSON file drives every command. Relative paths are resolved
//! against the directory holding the file. Secrets never appear in it:
//! endpoints name the environment variable that holds their key, either
//! bare (`"OPENAI_API_KEY"`) or as `"${OPENAI_API_KEY}"`, and the value is
//! read at call time.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsexam_core::exam::DistributionSpec;
use tsexam_core::irt::{FitConfig, RefineConfig};

use crate::harness::{ModelEndpoint, PromptConfig};

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Template file or directory; the built-in pack when absent.
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    #[serde(default)]
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub endpoints: Vec<ModelEndpoint>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides `distribution.master_seed` when set.
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub include_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            template_dir: None,
            distribution: DistributionSpec::default(),
            prompt: PromptConfig::default(),
            endpoints: Vec::new(),
            fit: FitConfig::default(),
            refine: RefineConfig::default(),
            output_dir: default_output_dir(),
            master_seed: None,
            include_plots: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("template source not found: {0}")]
    MissingTemplates(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

fn env_name(raw: &str) -> Result<String, String> {
    let name = raw.strip_prefix("${").and_then(|r| r.strip_suffix('}')).unwrap_or(raw);
    let valid = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit());
    if valid {
        Ok(name.to_string())
    } else {
        Err(format!("api_key_env '{raw}' is not an environment variable name"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(t) = &self.template_dir {
            if t.is_relative() {
                self.template_dir = Some(base.join(t));
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    /// Seed used everywhere: the top-level override or the distribution's.
    pub fn seed(&self) -> u64 {
        self.master_seed.unwrap_or(self.distribution.master_seed)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.master_seed = Some(seed);
        self.distribution.master_seed = seed;
    }

    /// Normalizes credential references and checks every setting that can
    /// be checked without touching the network.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        let seed = self.seed();
        self.distribution.master_seed = seed;
        if let Some(t) = &self.template_dir {
            if !t.exists() {
                return Err(ConfigError::MissingTemplates(t.clone()));
            }
        }
        self.distribution.validate().map_err(|e| ConfigError::Invalid(format!("distribution: {e}")))?;
        self.fit.validate().map_err(|e| ConfigError::Invalid(format!("fit: {e}")))?;
        self.refine.validate().map_err(|e| ConfigError::Invalid(format!("refine: {e}")))?;
        if !(self.prompt.temperature >= 0.0 && self.prompt.temperature.is_finite()) || self.prompt.max_tokens == 0 {
            return Err(ConfigError::Invalid("prompt: temperature must be >= 0 and max_tokens >= 1".into()));
        }
        let mut names = BTreeSet::new();
        for e in &mut self.endpoints {
            e.validate().map_err(ConfigError::Invalid)?;
            if !names.insert(e.name.clone()) {
                return Err(ConfigError::Invalid(format!("duplicate endpoint name '{}'", e.name)));
            }
            if let Some(raw) = &e.api_key_env {
                e.api_key_env = Some(env_name(raw).map_err(|m| ConfigError::Invalid(format!("endpoint '{}': {m}", e.name)))?);
            }
        }
        Ok(())
    }

    pub fn endpoint(&self, name: &str) -> Option<&ModelEndpoint> {
        self.endpoints.iter().find(|e| e.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_seed_override() {
        let mut cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.distribution.total(), 763);
        assert_eq!(cfg.seed(), 42);
        cfg.master_seed = Some(7);
        cfg.validate().unwrap();
        assert_eq!(cfg.distribution.master_seed, 7);
    }

    #[test]
    fn credential_references() {
        assert_eq!(env_name("${API_KEY}").unwrap(), "API_KEY");
        assert_eq!(env_name("API_KEY").unwrap(), "API_KEY");
        assert!(env_name("sk-live-123").is_err());
    }

    #[test]
    fn literal_keys_are_rejected() {
        let json = r#"{"endpoints":[{"name":"x","base_url":"http://h","model":"m","api_key":"secret"}]}"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_err());
    }

    #[test]
    fn missing_template_dir_names_path() {
        let mut cfg = RunConfig { template_dir: Some("/nonexistent/tpl".into()), ..RunConfig::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("/nonexistent/tpl"));
    }
}
