use serde::{Deserialize, Serialize};

use crate::env::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Training iterations, one episode each.
    pub episodes: usize,
    /// Steps per episode.
    pub steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub ppo_epochs: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_coef: f64,
    pub minibatches: usize,
    /// Global gradient-norm clip per network; 0 disables it.
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    /// Train the critic on running-normalised returns.
    pub value_normalization: bool,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            steps: 400,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            ppo_epochs: 15,
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            entropy_coef: 0.01,
            minibatches: 4,
            max_grad_norm: 10.0,
            hidden: vec![64, 64],
            value_normalization: true,
            seed: 0,
            mode: Mode::Cooperative,
        }
    }
}

impl TrainConfig {
    /// Laptop-scale preset: 300 episodes, otherwise the defaults.
    pub fn desk() -> Self {
        Self {
            episodes: 300,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("clip must lie in (0, 1)"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda must lie in [0, 1]"));
        }
        if self.ppo_epochs == 0 || self.minibatches == 0 {
            return Err(Error::config("ppo_epochs and minibatches must be >= 1"));
        }
        if self.episodes == 0 || self.steps == 0 {
            return Err(Error::config("episodes and steps must be >= 1"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        if !(self.entropy_coef >= 0.0 && self.max_grad_norm >= 0.0) {
            return Err(Error::config("entropy_coef and max_grad_norm must be >= 0"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Ok(())
    }
}
