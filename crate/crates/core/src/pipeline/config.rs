//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::explainer::ExplainerConfig;
use crate::models::{ModelKind, TrainConfig};
use crate::sampler::{AcceptanceFloors, GenerationConfig, StrategyMix};
use crate::split::SplitRatios;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub samples: usize,
    pub rate_low: f64,
    pub rate_high: f64,
    /// Edge-dropout share; absent means a fair coin per sample.
    pub alpha: Option<f64>,
    pub min_users: usize,
    pub min_items: usize,
    pub min_edges: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let g = GenerationConfig::default();
        SamplingConfig {
            samples: g.sample_count,
            rate_low: g.rate_range.0,
            rate_high: g.rate_range.1,
            alpha: None,
            min_users: g.floors.min_users,
            min_items: g.floors.min_items,
            min_edges: g.floors.min_edges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub k: usize,
    pub test: f64,
    pub validation: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        EvaluationConfig {
            k: 20,
            test: r.test,
            validation: r.validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    /// Per-model training settings; models without an entry use defaults.
    #[serde(default)]
    pub train: BTreeMap<ModelKind, TrainConfig>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub explainer: ExplainerConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("topo-rec-out")
}

fn default_workers() -> usize {
    1
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

impl PipelineConfig {
    /// Parses a config file; relative dataset and output paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.dataset.path, &mut cfg.output] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::ConfigError("workers must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::ConfigError("at least one model is required".into()));
        }
        if self.evaluation.k == 0 {
            return Err(Error::ConfigError("evaluation.k must be positive".into()));
        }
        self.generation().validate()?;
        for kind in &self.models {
            self.train_config(*kind).validate()?;
        }
        self.explainer.validate()
    }

    pub fn generation(&self) -> GenerationConfig {
        let s = &self.sampling;
        GenerationConfig {
            sample_count: s.samples,
            rate_range: (s.rate_low, s.rate_high),
            strategy_mix: s.alpha.map_or(StrategyMix::Uniform, StrategyMix::Alpha),
            master_seed: self.seed,
            floors: AcceptanceFloors {
                min_users: s.min_users,
                min_items: s.min_items,
                min_edges: s.min_edges,
            },
        }
    }

    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        self.train.get(&kind).cloned().unwrap_or_default()
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            test: self.evaluation.test,
            validation: self.evaluation.validation,
        }
    }

    /// Hash of every setting that affects per-sample results. Output
    /// directory and worker count are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        c.workers = 1;
        c.dataset.path = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
