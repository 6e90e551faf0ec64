//! Experiment configuration, read from a TOML file.
//!
//! Every key is optional; the defaults are the reference experimental
//! settings, so an empty file (or no file) reproduces the full-size runs.
//!
//! ```toml
//! master_seed = 0
//! output_dir = "out"
//! grid_step = 0.02
//! model_trees_per_cell = 5000
//! sim_runs_per_cell = 50
//! theta = "flat"            # or "deep", or a table as below
//!
//! # [theta]
//! # threshold = 1.0
//! # witnesses = [2, 2]
//! # duplicate_policy = "discount"
//!
//! [world]
//! n_agents = 1000
//! range_of_sight = 1.0
//! target_avg_neighbors = 50.0
//! speed = 0.1
//! sight_rule = "conjunctive"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tpop::{GridSpec, SightRule, StatePriors, TPoPParams, WorldConfig};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Preset(String),
    Explicit(TPoPParams),
}

impl ThetaSpec {
    pub fn resolve(&self) -> Result<(TPoPParams, String)> {
        match self {
            ThetaSpec::Preset(name) => match name.as_str() {
                "flat" => Ok((TPoPParams::flat(), name.clone())),
                "deep" => Ok((TPoPParams::deep(), name.clone())),
                other => bail!("unknown theta preset `{other}` (expected `flat` or `deep`)"),
            },
            ThetaSpec::Explicit(params) => Ok((params.clone(), "custom".to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub n_agents: usize,
    pub range_of_sight: f64,
    pub target_avg_neighbors: f64,
    pub speed: f64,
    pub sight_rule: SightRule,
}

impl Default for WorldSection {
    fn default() -> Self {
        let w = WorldConfig::default();
        WorldSection {
            n_agents: w.n_agents,
            range_of_sight: w.range_of_sight,
            target_avg_neighbors: w.target_avg_neighbors,
            speed: w.speed,
            sight_rule: w.sight_rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    master_seed: u64,
    output_dir: PathBuf,
    grid_step: f64,
    model_trees_per_cell: u64,
    sim_runs_per_cell: usize,
    theta: ThetaSpec,
    theta_label: Option<String>,
    world: WorldSection,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            grid_step: 0.02,
            model_trees_per_cell: 5000,
            sim_runs_per_cell: 50,
            theta: ThetaSpec::Preset("flat".into()),
            theta_label: None,
            world: WorldSection::default(),
        }
    }
}

/// Validated experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub theta: TPoPParams,
    pub theta_label: String,
    pub grid_step: f64,
    pub model_trees_per_cell: u64,
    pub sim_runs_per_cell: usize,
    pub world: WorldConfig,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let (theta, preset_label) = raw.theta.resolve()?;
        let mut config = ExperimentConfig {
            theta,
            theta_label: raw.theta_label.unwrap_or(preset_label),
            grid_step: raw.grid_step,
            model_trees_per_cell: raw.model_trees_per_cell,
            sim_runs_per_cell: raw.sim_runs_per_cell,
            world: WorldConfig {
                sight_rule: raw.world.sight_rule,
                ..WorldConfig::calibrated(
                    raw.world.n_agents,
                    raw.world.range_of_sight,
                    raw.world.target_avg_neighbors,
                    raw.world.speed,
                    StatePriors { p_h: 1.0, p_c: 0.0 },
                    raw.master_seed,
                )
            },
            master_seed: raw.master_seed,
            output_dir: raw.output_dir,
        };
        config.set_seed(raw.master_seed);
        config.validate()?;
        Ok(config)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.master_seed = seed;
        self.world.seed = seed;
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::from_step(self.grid_step)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            bail!("grid_step {} must lie in (0, 0.5]", self.grid_step);
        }
        self.grid()?;
        if self.model_trees_per_cell == 0 {
            bail!("model_trees_per_cell must be at least 1");
        }
        if self.sim_runs_per_cell == 0 {
            bail!("sim_runs_per_cell must be at least 1");
        }
        self.world.validate()?;
        Ok(())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::from_raw(RawConfig::default()).expect("defaults are valid")
    }
}
