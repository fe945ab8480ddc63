use std::path::{Path, PathBuf};

use gridsindy::evaluate::{DivergenceBound, PipelineConfig};
use gridsindy::gridsearch::{GridSpec, HeatmapMetric};
use gridsindy::ingest::{ColumnSpec, DEFAULT_CHUNK_LEN};
use gridsindy::library::LibrarySpec;
use gridsindy::preprocess::SmoothingConfig;
use gridsindy::regression::OptimizerConfig;
use gridsindy::simulate::{SwingParams, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

fn default_f_ref() -> f64 {
    50.0
}

fn default_chunk_len() -> usize {
    DEFAULT_CHUNK_LEN
}

fn default_active_threshold() -> f64 {
    1e-6
}

/// A heatmap to emit after a grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapRequest {
    pub optimizer: String,
    pub x: String,
    pub y: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<HeatmapMetric>,
}

/// Everything a command may need; each command checks for its own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Raw recording for `ingest`, chunk store for the other commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default = "default_f_ref")]
    pub f_ref: f64,
    #[serde(default = "default_chunk_len")]
    pub chunk_len: usize,
    #[serde(default)]
    pub columns: ColumnSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<LibrarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub divergence: DivergenceBound,
    #[serde(default = "default_active_threshold")]
    pub active_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_candidates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmaps: Option<Vec<HeatmapRequest>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swing: Option<SwingParams>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl RunConfig {
    /// Reads a JSON config; a relative `input` is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("invalid config {}: {e}", path.display())))?;
        if let Some(input) = &cfg.input {
            if input.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.input = Some(dir.join(input));
                }
            }
        }
        Ok(cfg)
    }

    pub fn input(&self) -> Result<&Path, Failure> {
        let path = self
            .input
            .as_deref()
            .ok_or_else(|| Failure::Config("no input given (--input or \"input\" in the config)".into()))?;
        if !path.is_file() {
            return Err(Failure::Config(format!("input {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, Failure> {
        let smoothing = require(self.smoothing, "smoothing")?;
        let library = require(self.library, "library")?;
        let optimizer = require(self.optimizer, "optimizer")?;
        let pipeline = PipelineConfig {
            divergence: self.divergence,
            active_threshold: self.active_threshold,
            ..PipelineConfig::new(smoothing, library, optimizer)
        };
        pipeline.validate()?;
        Ok(pipeline)
    }
}

pub fn require<T: Clone>(value: Option<T>, name: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::Config(format!("config has no \"{name}\" section")))
}
