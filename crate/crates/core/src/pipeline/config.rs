//! Declarative run configuration (TOML).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::gateway::{GatewayPolicy, ProviderConfig, ProviderKind};
use crate::ingest::{ColumnMap, CorpusSource, Label6Coding, SamplingPlan};
use crate::metrics::ScsWeights;
use crate::model::StrategyKind;

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "UNITE_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: Option<PathBuf>,
    pub columns: ColumnMap,
    pub label6_coding: Label6Coding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Sample size; `None` keeps the whole corpus.
    pub size: Option<usize>,
    pub seed: u64,
    pub max_deviation: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            size: None,
            seed: 42,
            max_deviation: crate::ingest::sampling::DEFAULT_MAX_DEVIATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagesConfig {
    /// Defaults to `<output>/images`.
    pub cache_dir: Option<PathBuf>,
    pub workers: usize,
    /// Drop rows whose image cannot be fetched before sampling.
    pub fetch_on_ingest: bool,
}

impl Default for ImagesConfig {
    fn default() -> Self {
        Self {
            cache_dir: None,
            workers: 8,
            fetch_on_ingest: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    /// Falls back to `UNITE_PROVIDER`, then gemini.
    pub provider: Option<ProviderKind>,
    /// Falls back to `UNITE_API_BASE`, then the provider default.
    pub api_base: Option<String>,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub workers: usize,
    pub policy: GatewayPolicy,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            provider: None,
            api_base: None,
            model_id: "gemini-1.5-pro".into(),
            temperature: 0.0,
            max_output_tokens: 2048,
            workers: 4,
            policy: GatewayPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureProviderKind {
    Reference,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub provider: FeatureProviderKind,
    pub url: Option<String>,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            provider: FeatureProviderKind::Reference,
            url: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// WordNet `dict` directory or a `word<TAB>depth` file. The small
    /// bundled table is used when unset.
    pub wordnet: Option<PathBuf>,
    pub scs_weights: ScsWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub strategies: Vec<StrategyKind>,
    pub corpus: CorpusConfig,
    pub sampling: SamplingConfig,
    pub images: ImagesConfig,
    pub gateway: GatewayConfig,
    pub features: FeatureConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            strategies: StrategyKind::ALL.to_vec(),
            corpus: CorpusConfig::default(),
            sampling: SamplingConfig::default(),
            images: ImagesConfig::default(),
            gateway: GatewayConfig::default(),
            features: FeatureConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Loads the file named by an explicit path, else `UNITE_CONFIG`, else
    /// returns defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, PipelineError> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.strategies.is_empty() {
            return bad("strategy list is empty".into());
        }
        let mut seen = HashSet::new();
        for s in &self.strategies {
            if !seen.insert(s) {
                return bad(format!("strategy {} listed twice", s.slug()));
            }
        }
        if let Some(0) = self.sampling.size {
            return bad("sampling.size must be positive".into());
        }
        let d = self.sampling.max_deviation;
        if !(d > 0.0 && d < 1.0) {
            return bad(format!("sampling.max_deviation {d} outside (0, 1)"));
        }
        if self.gateway.workers == 0 || self.images.workers == 0 {
            return bad("worker counts must be positive".into());
        }
        if self.features.provider == FeatureProviderKind::Http && self.features.url.is_none() {
            return bad("features.url is required for the http provider".into());
        }
        self.gateway
            .policy
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.metrics
            .scs_weights
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn corpus_source(&self) -> Result<CorpusSource, PipelineError> {
        let path = self
            .corpus
            .path
            .clone()
            .ok_or_else(|| PipelineError::Config("corpus.path is not set".into()))?;
        Ok(CorpusSource {
            path,
            columns: self.corpus.columns.clone(),
            label6_coding: self.corpus.label6_coding,
        })
    }

    pub fn sampling_plan(&self, population: usize) -> SamplingPlan {
        SamplingPlan {
            target_size: self.sampling.size.unwrap_or(population),
            seed: self.sampling.seed,
            max_proportion_deviation: self.sampling.max_deviation,
        }
    }

    pub fn image_cache_dir(&self) -> PathBuf {
        self.images
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("images"))
    }

    /// Gateway policy with the response cache defaulting under the output dir.
    pub fn gateway_policy(&self) -> GatewayPolicy {
        let mut p = self.gateway.policy.clone();
        if p.cache_dir.is_none() {
            p.cache_dir = Some(self.output_dir.join("responses"));
        }
        p
    }

    /// Provider settings from config, then environment, then defaults. The
    /// API key is only ever read from the environment.
    pub fn provider_config(&self) -> Result<ProviderConfig, PipelineError> {
        let kind = match self.gateway.provider {
            Some(k) => k,
            None => match std::env::var("UNITE_PROVIDER") {
                Ok(v) if !v.is_empty() => v.parse().map_err(PipelineError::Config)?,
                _ => ProviderKind::Gemini,
            },
        };
        let base = self
            .gateway
            .api_base
            .clone()
            .or_else(|| std::env::var("UNITE_API_BASE").ok().filter(|v| !v.is_empty()))
            .unwrap_or_else(|| kind.default_base().to_string());
        let key = std::env::var("UNITE_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(ProviderConfig::new(kind, base, key))
    }

    pub fn strategy_paths(&self, dir: &Path) -> Vec<(StrategyKind, PathBuf)> {
        self.strategies
            .iter()
            .map(|s| (*s, dir.join(format!("{}.jsonl", s.slug()))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_validate() {
        let cfg = PipelineConfig::from_toml(
            r#"
output_dir = "run1"
strategies = ["list_of_objects", "scene_graph"]

[sampling]
size = 100
seed = 7

[gateway]
provider = "generic"
model_id = "mock"

[gateway.policy]
max_retries = 1
requests_per_minute = 30
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.strategies.len(), 2);
        assert_eq!(cfg.gateway.policy.requests_per_minute, 30);
        assert_eq!(cfg.gateway_policy().cache_dir.unwrap(), PathBuf::from("run1/responses"));
        assert_eq!(cfg.features.seed, 42);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
        let dup = PipelineConfig::from_toml(r#"strategies = ["scene_graph", "scene_graph"]"#).unwrap();
        assert!(dup.validate().is_err());
        let empty = PipelineConfig::from_toml("strategies = []").unwrap();
        assert!(empty.validate().is_err());
        let http = PipelineConfig::from_toml("[features]\nprovider = \"http\"").unwrap();
        assert!(http.validate().is_err());
    }
}
