//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rsg_core::{GameSpec, Role, SolverOptions, UtilityModel};
use serde::{Deserialize, Serialize};

use crate::channels::{generate_channels, ChannelModel, Scenario, ScenarioThresholds};
use crate::error::{HarnessError, Result};

/// Players, boxes, noise and utility shared by every instance; gains come from the channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecTemplate {
    pub n_leaders: usize,
    pub n_followers: usize,
    pub n_dims: usize,
    #[serde(default)]
    pub action_min: f64,
    /// One upper bound per player, applied on every dimension.
    pub action_max: Vec<f64>,
    pub noise: f64,
    pub utility: UtilityModel,
}

impl SpecTemplate {
    pub fn n_players(&self) -> usize {
        self.n_leaders + self.n_followers
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_players();
        if self.n_leaders == 0 || n < 2 || self.n_dims == 0 {
            return Err(HarnessError::Config(
                "need at least one leader, two players and one dimension".into(),
            ));
        }
        if self.action_max.len() != n {
            return Err(HarnessError::Config(format!(
                "action_max has {} entries for {n} players",
                self.action_max.len()
            )));
        }
        let per_player = match &self.utility {
            UtilityModel::PricedThroughput { price } => price.len(),
            UtilityModel::BudgetedThroughput { budget } => budget.len(),
        };
        if per_player != n {
            return Err(HarnessError::Config(format!(
                "utility parameters cover {per_player} players, expected {n}"
            )));
        }
        Ok(())
    }

    /// Leaders first, then followers.
    pub fn build(&self, gains: Vec<Vec<Vec<f64>>>) -> Result<GameSpec> {
        let n = self.n_players();
        let k = self.n_dims;
        let roles = (0..n)
            .map(|i| {
                if i < self.n_leaders {
                    Role::Leader
                } else {
                    Role::Follower
                }
            })
            .collect();
        Ok(GameSpec::new(
            roles,
            vec![vec![self.action_min; k]; n],
            self.action_max.iter().map(|&m| vec![m; k]).collect(),
            gains,
            vec![vec![self.noise; k]; n],
            self.utility.clone(),
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    #[serde(rename = "csv+svg")]
    CsvSvg,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "csv+svg" => Some(Self::CsvSvg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: SpecTemplate,
    pub channel: ChannelModel,
    pub rng_seed: u64,
    pub ensemble_size: usize,
    pub eps_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub thresholds: ScenarioThresholds,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(HarnessError::Config(format!("{name} must start at 0")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::Config(format!(
            "{name} must be finite and strictly ascending"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.ensemble_size == 0 {
            return Err(HarnessError::Config(
                "ensemble_size must be at least 1".into(),
            ));
        }
        check_grid("eps_grid", &self.eps_grid)?;
        check_grid("delta_grid", &self.delta_grid)?;
        self.thresholds.validate()?;
        if self.scenario != Scenario::None && self.spec.n_players() != 2 {
            return Err(HarnessError::Config(
                "scenario filters apply to one leader and one follower".into(),
            ));
        }
        Ok(())
    }

    /// Game of instance `index`, drawn from its own random stream.
    pub fn instance(&self, index: u64) -> Result<GameSpec> {
        let mut rng = crate::instance_rng(self.rng_seed, index);
        self.instance_from(&mut rng)
    }

    fn instance_from(&self, rng: &mut ChaCha8Rng) -> Result<GameSpec> {
        let gains = generate_channels(
            &self.channel,
            self.scenario,
            &self.thresholds,
            self.spec.n_players(),
            self.spec.n_dims,
            rng,
        )?;
        self.spec.build(gains)
    }

    /// Two-player priced example with fixed unit direct gains and cross gains 0.5.
    pub fn example() -> Self {
        Self {
            spec: SpecTemplate {
                n_leaders: 1,
                n_followers: 1,
                n_dims: 1,
                action_min: 0.0,
                action_max: vec![1.0, 2.0],
                noise: 0.1,
                utility: UtilityModel::PricedThroughput {
                    price: vec![0.8, 0.5],
                },
            },
            channel: ChannelModel::Fixed {
                cross_gain: vec![vec![vec![1.0], vec![0.5]], vec![vec![0.5], vec![1.0]]],
            },
            rng_seed: 0,
            ensemble_size: 1,
            eps_grid: vec![0.0, 0.1],
            delta_grid: vec![0.0, 0.1],
            scenario: Scenario::None,
            thresholds: ScenarioThresholds::default(),
            output: OutputConfig::default(),
            solver: SolverOptions::default(),
        }
    }

    /// Budgeted pair over multipath channels, used for the CDF study.
    pub fn budgeted_study(scenario: Scenario) -> Self {
        Self {
            spec: SpecTemplate {
                n_leaders: 1,
                n_followers: 1,
                n_dims: 4,
                action_min: 0.0,
                action_max: vec![1.0, 1.0],
                noise: 0.01,
                utility: UtilityModel::BudgetedThroughput {
                    budget: vec![1.0, 1.0],
                },
            },
            channel: ChannelModel::FourRayRayleigh {
                taps: 4,
                delay_spread: 1.0,
            },
            rng_seed: 7,
            ensemble_size: 2000,
            eps_grid: vec![0.0, 0.01],
            delta_grid: vec![0.0],
            scenario,
            thresholds: ScenarioThresholds::default(),
            output: OutputConfig::default(),
            solver: SolverOptions {
                restarts: 3,
                tol: 1e-10,
                ..SolverOptions::default()
            },
        }
    }
}
