use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use synprobe_core::{ModelEndpoint, RunConfig, SampleConfig};

/// Contents of the `--config` JSON file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Rule file replacing the built-in patterns.
    pub patterns: Option<PathBuf>,
    /// Template file replacing the built-in templates.
    pub templates: Option<PathBuf>,
    pub sample: SampleConfig,
    pub run: RunConfig,
    pub endpoints: Vec<ModelEndpoint>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Config = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative file references resolve against the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.patterns, &mut cfg.templates].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for e in &cfg.endpoints {
            e.validate()?;
        }
        cfg.run.validate()?;
        Ok(cfg)
    }

    pub fn endpoint(&self, label: &str) -> Result<&ModelEndpoint> {
        match self.endpoints.iter().find(|e| e.label == label) {
            Some(e) => Ok(e),
            None if self.endpoints.is_empty() => bail!("no endpoints configured; pass --config"),
            None => bail!(
                "unknown endpoint {label:?}; configured: {}",
                self.endpoints.iter().map(|e| e.label.as_str()).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}
