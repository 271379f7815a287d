//! The single JSON document configuring every pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::interaction::{InteractionConfig, TrainConfig};
use crate::preprocess::NormalizationConfig;
use crate::reasoner::ReasonerConfig;
use crate::uncertainty::{RiskConfig, UncertaintyConfig};

/// Environment variable naming a config file, used when `--config` is absent.
pub const CONFIG_ENV: &str = "PRIME_CONFIG";

/// Defaults for generated scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_objects: usize,
    pub noise: f64,
    pub points_per_m2: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_objects: 0,
            noise: 0.02,
            points_per_m2: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub normalization: NormalizationConfig,
    pub detector: DetectorConfig,
    pub uncertainty: UncertaintyConfig,
    pub risk: RiskConfig,
    pub interaction: InteractionConfig,
    pub reasoner: ReasonerConfig,
    pub training: TrainConfig,
    pub scenario: ScenarioConfig,
    /// Trained network parameters; a seeded initialization is used when absent.
    pub bgnn_params: Option<PathBuf>,
    /// Seed for network initialization and Monte Carlo sampling.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        self.detector.validate()?;
        self.uncertainty.validate()?;
        self.risk.validate()?;
        self.interaction.validate()?;
        self.reasoner.validate()?;
        self.training.validate()?;
        let s = &self.scenario;
        if !(s.noise.is_finite() && s.noise >= 0.0 && s.points_per_m2.is_finite() && s.points_per_m2 > 0.0) {
            return Err(Error::Config("scenario noise must be >= 0 and points_per_m2 > 0".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::parse("pipeline config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Reads and validates `path`; relative `bgnn_params` resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })?;
        if let (Some(p), Some(dir)) = (&cfg.bgnn_params, path.parent()) {
            if p.is_relative() {
                cfg.bgnn_params = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    /// `explicit`, else the file named by `PRIME_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }
}
