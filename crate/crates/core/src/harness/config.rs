//! Estimator and run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::SimParams;
use crate::stage1::{LibraryKind, Stage1Method};
use crate::stage2::Stage2Method;

fn default_k1() -> usize {
    10
}
fn default_k2() -> usize {
    5
}

/// One estimator pipeline: a Stage-1 endpoint estimator and a Stage-2 effect
/// estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub stage1: Stage1Method,
    pub stage2: Stage2Method,
    #[serde(default)]
    pub library: LibraryKind,
    /// Stage-1 cross-validation folds.
    #[serde(default = "default_k1")]
    pub k1: usize,
    /// Stage-2 cross-validation folds.
    #[serde(default = "default_k2")]
    pub k2: usize,
    /// Include the post-baseline covariate in the Stage-1 adjustment set.
    #[serde(default)]
    pub adjust_l: bool,
}

impl EstimatorConfig {
    pub fn new(stage1: Stage1Method, stage2: Stage2Method) -> Self {
        Self {
            stage1,
            stage2,
            library: LibraryKind::Standard,
            k1: default_k1(),
            k2: default_k2(),
            adjust_l: false,
        }
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.stage1, self.stage2)
    }

    /// Key identifying the Stage-1 computation (estimators sharing it reuse
    /// endpoints within a replicate).
    pub fn stage1_key(&self) -> (Stage1Method, LibraryKind, usize, bool) {
        (self.stage1, self.library, self.k1, self.adjust_l)
    }

    /// Stream tag for Stage-1 randomness; depends only on Stage-1 inputs so
    /// adding Stage-2 variants never perturbs Stage-1 streams.
    pub fn stage1_stream_id(&self) -> u64 {
        let m = match self.stage1 {
            Stage1Method::Screened => 0u64,
            Stage1Method::Eligible => 1,
            Stage1Method::Unadjusted => 2,
            Stage1Method::Tmle => 3,
        };
        let lib = match self.library {
            LibraryKind::Standard => 0u64,
            LibraryKind::MainEffects => 1,
            LibraryKind::MeanOnly => 2,
        };
        m | (lib << 8) | ((self.k1 as u64) << 16) | ((u64::from(self.adjust_l)) << 32)
    }

    /// Stream tag for Stage-2 randomness.
    pub fn stage2_stream_id(&self) -> u64 {
        let m = match self.stage2 {
            Stage2Method::Unadjusted => 0u64,
            Stage2Method::TmleAps => 1,
        };
        m | ((self.k2 as u64) << 8)
    }

    /// The five benchmark configurations.
    pub fn benchmark_set() -> Vec<EstimatorConfig> {
        vec![
            EstimatorConfig::new(Stage1Method::Screened, Stage2Method::Unadjusted),
            EstimatorConfig::new(Stage1Method::Eligible, Stage2Method::Unadjusted),
            EstimatorConfig::new(Stage1Method::Unadjusted, Stage2Method::Unadjusted),
            EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::Unadjusted),
            EstimatorConfig::new(Stage1Method::Tmle, Stage2Method::TmleAps),
        ]
    }
}

fn default_reps() -> usize {
    1000
}
fn default_seed() -> u64 {
    1
}
fn default_estimators() -> Vec<EstimatorConfig> {
    EstimatorConfig::benchmark_set()
}

/// Full run configuration (JSON file for the CLI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            estimators: default_estimators(),
            reps: default_reps(),
            seed: default_seed(),
        }
    }
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.sim.validate()?;
        if cfg.estimators.is_empty() {
            return Err(Error::Config("at least one estimator required".into()));
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }
}
