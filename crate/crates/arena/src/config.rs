use std::path::{Path, PathBuf};
use std::sync::Arc;

use ragkit_core::pipeline::{BackendRegistry, Corpus, Pipeline, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::service::{Arena, ArenaError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPaths {
    /// Index directory written by `index build`.
    pub index: PathBuf,
    /// Segment JSONL.
    pub segments: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaSettings {
    /// Seeds the blinded side order.
    pub seed: u64,
    pub event_log: Option<PathBuf>,
}

/// Server configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeConfig {
    pub corpus: CorpusPaths,
    #[serde(default)]
    pub arena: ArenaSettings,
    #[serde(default)]
    pub backends: BackendRegistry,
    pub pipelines: Vec<PipelineConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Arena(#[from] ArenaError),
}

impl ServeConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.corpus.index);
        fix(&mut cfg.corpus.segments);
        if let Some(log) = cfg.arena.event_log.as_mut() {
            fix(log);
        }
        Ok(cfg)
    }

    pub fn build_arena(&self) -> Result<Arena, ConfigError> {
        let corpus = Corpus::open(&self.corpus.index, &self.corpus.segments).map_err(ArenaError::from)?;
        let pipelines = self
            .pipelines
            .iter()
            .map(|p| Pipeline::build(p.clone(), &self.backends))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ArenaError::from)?;
        Ok(Arena::new(pipelines, Arc::new(corpus), self.arena.seed, self.arena.event_log.clone())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ServeConfig::from_toml(
            r#"
[corpus]
index = "idx"
segments = "segments.jsonl"

[arena]
seed = 7
event_log = "events.jsonl"

[backends.gpt]
kind = "chat"
url = "https://api.example.com/v1/chat/completions"
model = "some-model"
api_key_env = "OPENAI_API_KEY"

[[pipelines]]
id = "bm25-mock"

[[pipelines]]
id = "bm25-gpt"
generator = { backend = "gpt" }
reranker = { backend = "gpt", top_k = 10, plan = { window = 20, stride = 10, passes = 1 } }
"#,
        )
        .unwrap();
        assert_eq!(cfg.arena.seed, 7);
        assert_eq!(cfg.pipelines.len(), 2);
        assert_eq!(cfg.pipelines[0].generator.backend, "mock");
        assert_eq!(cfg.pipelines[1].reranker.top_k, 10);
        assert_eq!(cfg.backends["gpt"].settings.api_key_env.as_deref(), Some("OPENAI_API_KEY"));
        for p in &cfg.pipelines {
            assert!(Pipeline::build(p.clone(), &cfg.backends).is_ok());
        }
    }

    #[test]
    fn missing_pipelines_rejected() {
        assert!(ServeConfig::from_toml("[corpus]\nindex='i'\nsegments='s'\n").is_err());
    }
}
