//! Run configuration: a JSON file listing scenarios (generator specs or model
//! file paths) plus global knobs.

use anyhow::{bail, Context};
use cetool_core::bounds::ModuliKind;
use cetool_core::model::{AbstractionDef, EstimatorDef};
use cetool_core::scenarios::ScenarioSpec;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenarios: Vec<ScenarioEntry>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_moduli")]
    pub moduli: ModuliKind,
    /// Construction tolerance; recorded in outputs for provenance.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Episodes for Monte-Carlo evaluation in bound-only mode.
    #[serde(default = "default_mc_episodes")]
    pub mc_episodes: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    0
}

fn default_budget() -> usize {
    cetool_core::DEFAULT_BUDGET
}

fn default_moduli() -> ModuliKind {
    ModuliKind::Linear
}

fn default_tolerance() -> f64 {
    cetool_core::DEFAULT_TOL
}

fn default_mc_episodes() -> usize {
    2000
}

/// One configured scenario: either a generator spec (tagged by `family`) or a
/// path to a model file, optionally repeated with consecutive seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioEntry {
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    #[serde(flatten)]
    pub source: ScenarioSource,
}

fn default_repeat() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Spec(ScenarioSpec),
    Model {
        model: PathBuf,
        #[serde(default)]
        abstraction: Option<AbstractionDef>,
        #[serde(default)]
        estimator: Option<EstimatorDef>,
    },
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        if cfg.scenarios.is_empty() {
            bail!("config lists no scenarios");
        }
        if cfg.budget == 0 {
            bail!("budget must be positive");
        }
        Ok(cfg)
    }
}
