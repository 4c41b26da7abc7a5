use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Method, Scenario};
use super::metrics::EpisodeMetrics;
use crate::baselines::DrivingPolicy;
use crate::env::{Env, EnvConfig, EMV_INDEX};
use crate::error::Result;

const EVAL_STREAM: u64 = 0x6576_616c_7365_6564;

/// Environment seeds of the evaluation episodes for `seed`. Every method
/// evaluated under the same seed sees the same episodes.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EVAL_STREAM);
    (0..episodes).map(|_| rng.random()).collect()
}

/// Identifies the rows produced by one evaluation.
#[derive(Debug, Clone)]
pub struct RunTag {
    pub study: String,
    pub scenario: Scenario,
    pub method: Method,
    pub label: String,
    pub seed: u64,
}

/// Plays one full episode with `policy` and measures it.
pub fn evaluate_episode(
    policy: &dyn DrivingPolicy,
    env_cfg: &EnvConfig,
    env_seed: u64,
    tag: &RunTag,
    episode: usize,
) -> Result<EpisodeMetrics> {
    let mut env = Env::new(env_cfg.clone(), env_seed)?;
    let n = env.num_agents();
    let (mut reward, mut emv_speed, mut av_speed) = (0.0, 0.0, 0.0);
    let (mut risk, mut emv_risk) = (0.0, 0.0);
    let (mut gap_sum, mut gap_count) = (0.0, 0usize);
    let mut collisions = 0;
    let mut steps = 0usize;
    while !env.is_done() {
        let actions = policy.act_all(&env);
        let out = env.step(&actions)?;
        steps += 1;
        reward += out.rewards.iter().sum::<f64>();
        risk += out.risks.iter().sum::<f64>();
        emv_risk += out.risks[EMV_INDEX];
        collisions += out.collisions.len();
        for (i, a) in env.agents().iter().enumerate() {
            if i == EMV_INDEX {
                emv_speed += a.v;
            } else {
                av_speed += a.v;
            }
            if let Some(g) = env.leading_gap(i) {
                gap_sum += g;
                gap_count += 1;
            }
        }
    }
    let steps_f = steps.max(1) as f64;
    let avs = (steps * (n - 1)).max(1) as f64;
    Ok(EpisodeMetrics {
        study: tag.study.clone(),
        scenario: tag.scenario,
        method: tag.method,
        label: tag.label.clone(),
        agents: n,
        seed: tag.seed,
        episode,
        reward,
        emv_speed: emv_speed / steps_f,
        av_speed: if n > 1 { av_speed / avs } else { 0.0 },
        collisions,
        mean_risk: risk / (steps_f * n as f64),
        emv_risk: emv_risk / steps_f,
        safety_distance: if gap_count > 0 { gap_sum / gap_count as f64 } else { f64::NAN },
    })
}

/// Evaluates `policy` on each environment seed in order.
pub fn evaluate_policy(
    policy: &dyn DrivingPolicy,
    env_cfg: &EnvConfig,
    env_seeds: &[u64],
    tag: &RunTag,
) -> Result<Vec<EpisodeMetrics>> {
    env_seeds
        .iter()
        .enumerate()
        .map(|(e, &s)| evaluate_episode(policy, env_cfg, s, tag, e))
        .collect()
}
