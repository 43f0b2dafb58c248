use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::datasets::DatasetName;
use crate::llm::{DEFAULT_CONCURRENCY, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::postprocess::DEFAULT_CUTOFF;
use crate::prompting::Method;
use crate::umr::EXEMPLAR_FILE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Http,
    Replay,
}

fn default_seed() -> u64 {
    13
}
fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}
fn default_concurrency() -> usize {
    DEFAULT_CONCURRENCY
}
fn default_max_tokens() -> u32 {
    DEFAULT_MAX_OUTPUT_TOKENS
}
fn default_true() -> bool {
    true
}

/// Everything needed to reproduce one (dataset, method, model) run.
///
/// Relative paths are resolved against the directory of the config file
/// they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetName,
    pub dataset_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inventory: Option<PathBuf>,
    #[serde(default)]
    pub drop_conflict: bool,
    pub method: Method,
    pub model: String,
    pub backend: BackendChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_dir: Option<PathBuf>,
    #[serde(default)]
    pub exemplars: Vec<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_true")]
    pub strict_greedy: bool,
    pub cache_dir: PathBuf,
    pub output: PathBuf,
    /// Process only the first `limit` samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset_path);
        fix(&mut self.cache_dir);
        fix(&mut self.output);
        if let Some(p) = &mut self.inventory {
            fix(p);
        }
        if let Some(p) = &mut self.replay_dir {
            fix(p);
        }
        for p in &mut self.exemplars {
            fix(p);
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        let mut name = self.output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        self.output.with_file_name(name)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let need = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(RunError::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        need(&self.dataset_path, "dataset file")?;
        if let Some(p) = &self.inventory {
            need(p, "inventory file")?;
        }
        match self.method {
            Method::Umr if self.exemplars.len() != EXEMPLAR_FILE_COUNT => {
                return Err(RunError::Config(format!(
                    "method umr needs exactly {EXEMPLAR_FILE_COUNT} exemplar files, got {}",
                    self.exemplars.len()
                )))
            }
            Method::Umr => {
                for p in &self.exemplars {
                    need(p, "exemplar file")?;
                }
            }
            Method::Baseline => {}
        }
        match self.backend {
            BackendChoice::Replay => match &self.replay_dir {
                Some(p) => need(p, "replay directory")?,
                None => return Err(RunError::Config("backend replay needs replay_dir".into())),
            },
            BackendChoice::Http if self.base_url.is_none() => {
                return Err(RunError::Config("backend http needs base_url".into()))
            }
            BackendChoice::Http => {}
        }
        if !(0.0..=1.0).contains(&self.cutoff) {
            return Err(RunError::Config(format!(
                "cutoff {} outside [0, 1]",
                self.cutoff
            )));
        }
        if self.concurrency == 0 {
            return Err(RunError::Config("concurrency must be at least 1".into()));
        }
        if self.model.trim().is_empty() {
            return Err(RunError::Config("model is empty".into()));
        }
        Ok(())
    }
}
