use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{GippsParams, MpcParams};
use crate::env::{EnvConfig, RewardWeights, TrackConfig, VehicleSpec};
use crate::error::{Error, Result};
use crate::mappo::TrainConfig;
use crate::risk::RiskParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Two-lane ring.
    #[default]
    Road,
    /// Four-lane ring.
    Highway,
}

impl Scenario {
    pub fn lanes(self) -> usize {
        match self {
            Scenario::Road => 2,
            Scenario::Highway => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Road => "road",
            Scenario::Highway => "highway",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "road" => Ok(Scenario::Road),
            "highway" => Ok(Scenario::Highway),
            _ => Err(Error::config(format!("unknown scenario `{s}` (road|highway)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Mappo,
    Gipps,
    Mpc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mappo, Method::Gipps, Method::Mpc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mappo => "mappo",
            Method::Gipps => "gipps",
            Method::Mpc => "mpc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mappo" => Ok(Method::Mappo),
            "gipps" => Ok(Method::Gipps),
            "mpc" => Ok(Method::Mpc),
            _ => Err(Error::config(format!("unknown method `{s}` (mappo|gipps|mpc)"))),
        }
    }
}

/// One `(w_risk, w_eff)` point of the reward sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardPoint {
    pub w_risk: f64,
    pub w_eff: f64,
}

impl RewardPoint {
    pub fn label(&self) -> String {
        format!("w_risk={}_w_eff={}", self.w_risk, self.w_eff)
    }
}

pub fn default_reward_grid() -> Vec<RewardPoint> {
    [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0), (1.0, 0.5), (1.0, 0.0)]
        .into_iter()
        .map(|(w_risk, w_eff)| RewardPoint { w_risk, w_eff })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub scenario: Scenario,
    /// Vehicles including the EMV.
    pub agents: usize,
    /// Method for `eval`; studies cover their own methods.
    pub method: Method,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Load MAPPO policies from here instead of training. Seed `s` reads
    /// `<checkpoint>/seed_<s>`.
    pub checkpoint: Option<PathBuf>,
    /// Save a checkpoint every this many iterations; 0 saves only the final one.
    pub checkpoint_every: usize,
    pub reward_grid: Vec<RewardPoint>,
    pub agent_counts: Vec<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            scenario: Scenario::Road,
            agents: 10,
            method: Method::Mappo,
            eval_episodes: 10,
            seeds: vec![0, 1, 2],
            out_dir: PathBuf::from("results"),
            checkpoint: None,
            checkpoint_every: 0,
            reward_grid: default_reward_grid(),
            agent_counts: vec![10, 20],
        }
    }
}

/// Environment settings other than lanes, agents, reward and risk, which
/// come from the scenario and their own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvSection {
    pub loop_length: f64,
    pub lane_width: f64,
    pub dt: f64,
    pub av: VehicleSpec,
    pub emv: VehicleSpec,
    pub neighbours: usize,
    pub lane_change_steps: u32,
    pub spawn_gap: f64,
    pub post_collision_gap: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            loop_length: env.track.loop_length,
            lane_width: env.track.lane_width,
            dt: env.track.dt,
            av: env.av,
            emv: env.emv,
            neighbours: env.neighbours,
            lane_change_steps: env.lane_change_steps,
            spawn_gap: env.spawn_gap,
            post_collision_gap: env.post_collision_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub train: TrainConfig,
    pub reward: RewardWeights,
    pub risk: RiskParams,
    pub env: EnvSection,
    pub gipps: GippsParams,
    pub mpc: MpcParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentSection::default(),
            train: TrainConfig::desk(),
            reward: RewardWeights::default(),
            risk: RiskParams::default(),
            env: EnvSection::default(),
            gipps: GippsParams::default(),
            mpc: MpcParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let x = &self.experiment;
        if x.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if x.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be >= 1"));
        }
        self.train.validate()?;
        self.gipps.validate()?;
        self.mpc.validate()?;
        self.env_config(x.agents).validate()
    }

    /// Environment for `agents` vehicles under this config.
    pub fn env_config(&self, agents: usize) -> EnvConfig {
        let e = &self.env;
        EnvConfig {
            track: TrackConfig {
                loop_length: e.loop_length,
                lanes: self.experiment.scenario.lanes(),
                lane_width: e.lane_width,
                dt: e.dt,
            },
            agents,
            av: e.av,
            emv: e.emv,
            horizon: self.train.steps,
            neighbours: e.neighbours,
            lane_change_steps: e.lane_change_steps,
            spawn_gap: e.spawn_gap,
            post_collision_gap: e.post_collision_gap,
            reward: self.reward,
            risk: self.risk,
            mode: self.train.mode,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }
}
