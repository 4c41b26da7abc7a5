use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, TransitionRecord};
use super::bundle::PolicyBundle;
use super::config::TrainConfig;
use super::loss::{actor_objective, critic_loss, ActorBatch, CriticBatch};
use crate::env::{Action, Env, EnvConfig, EMV_INDEX};
use crate::error::{Error, Result};

/// Episode totals gathered while collecting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub agents: usize,
    /// Sum of rewards over all agents and steps.
    pub summed_reward: f64,
    pub collisions: usize,
    pub risk_sum: f64,
    pub emv_speed_sum: f64,
    pub av_speed_sum: f64,
}

impl EpisodeSummary {
    pub fn mean_risk(&self) -> f64 {
        self.risk_sum / (self.steps * self.agents).max(1) as f64
    }

    pub fn emv_speed(&self) -> f64 {
        self.emv_speed_sum / self.steps.max(1) as f64
    }

    pub fn av_speed(&self) -> f64 {
        let n = self.steps * self.agents.saturating_sub(1);
        if n == 0 {
            0.0
        } else {
            self.av_speed_sum / n as f64
        }
    }

    pub(crate) fn observe(&mut self, env: &Env, rewards: &[f64], risks: &[f64], collisions: usize) {
        self.steps += 1;
        self.agents = env.num_agents();
        self.summed_reward += rewards.iter().sum::<f64>();
        self.risk_sum += risks.iter().sum::<f64>();
        self.collisions += collisions;
        for (i, a) in env.agents().iter().enumerate() {
            if i == EMV_INDEX {
                self.emv_speed_sum += a.v;
            } else {
                self.av_speed_sum += a.v;
            }
        }
    }
}

/// Runs `steps` joint steps with sampled actions and records every agent's
/// transition. The last recorded step is terminal with a zero bootstrap.
pub fn collect_rollout<R: Rng + ?Sized>(
    env: &mut Env,
    bundle: &PolicyBundle,
    steps: usize,
    rng: &mut R,
) -> Result<(RolloutBuffer, EpisodeSummary)> {
    bundle.check_env(env)?;
    let n = env.num_agents();
    let mut buffer = RolloutBuffer::new(n);
    buffer.records.reserve(steps * n);
    let mut summary = EpisodeSummary::default();
    let mut obs = env.observations();
    let mut global = env.global_features();
    for t in 0..steps {
        let dists = bundle.distributions(obs.view())?;
        let values = bundle.values(global.view())?;
        let picks: Vec<usize> = dists.iter().map(|d| d.sample(rng)).collect();
        let actions: Vec<Action> = picks
            .iter()
            .map(|&k| Action::from_index(k).expect("actor width matches action count"))
            .collect();
        let out = env.step(&actions)?;
        let done = out.done || t + 1 == steps;
        for j in 0..n {
            buffer.records.push(TransitionRecord {
                agent: j,
                observation: obs.index_axis(Axis(0), j).to_vec(),
                global: global.index_axis(Axis(0), j).to_vec(),
                action: picks[j],
                log_prob: dists[j].log_prob(picks[j]),
                value: values[j],
                reward: out.rewards[j],
                done,
            });
        }
        summary.observe(env, &out.rewards, &out.risks, out.collisions.len());
        obs = out.observations;
        global = out.global;
        if done {
            break;
        }
    }
    buffer.bootstrap = Some(vec![0.0; n]);
    Ok((buffer, summary))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor_objective: f64,
    pub critic_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    /// Clip fraction of each actor's first minibatch, averaged over actors.
    pub initial_clip_fraction: f64,
    pub actor_steps: usize,
    pub critic_steps: usize,
}

/// Scales `g` so its L2 norm does not exceed `max_norm`.
pub fn clip_grad_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

fn minibatches<R: Rng + ?Sized>(indices: &[usize], count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(rng);
    let count = count.min(shuffled.len()).max(1);
    let (base, extra) = (shuffled.len() / count, shuffled.len() % count);
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for b in 0..count {
        let len = base + usize::from(b < extra);
        out.push(shuffled[start..start + len].to_vec());
        start += len;
    }
    out
}

/// PPO epochs over `buffer`, which must carry normalised advantages and returns.
pub fn ppo_update<R: Rng + ?Sized>(
    buffer: &RolloutBuffer,
    bundle: &mut PolicyBundle,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    if !buffer.has_advantages() || buffer.returns.len() != buffer.len() {
        return Err(Error::config("advantages and returns must be computed before updating"));
    }
    let by_actor = records_by(buffer, |j| bundle.actor_of(j), bundle.actors().len());
    let by_critic = records_by(buffer, |j| bundle.critic_of(j), bundle.critics().len());

    // Critic targets and old values in each critic's normalised units.
    let mut targets = vec![0.0; buffer.len()];
    let mut old_values = vec![0.0; buffer.len()];
    for (k, idx) in by_critic.iter().enumerate() {
        let norm = if cfg.value_normalization {
            let returns: Vec<f64> = idx.iter().map(|&i| buffer.returns[i]).collect();
            bundle.normalizers_mut()[k].update(&returns);
            bundle.normalizers()[k]
        } else {
            Default::default()
        };
        for &i in idx {
            targets[i] = norm.normalize(buffer.returns[i]);
            old_values[i] = norm.normalize(buffer.records[i].value);
        }
    }

    let mut stats = UpdateStats::default();
    let mut initial = Vec::new();
    for epoch in 0..cfg.ppo_epochs {
        for (k, idx) in by_actor.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            for (b, mb) in minibatches(idx, cfg.minibatches, rng).into_iter().enumerate() {
                let obs = buffer.observations(&mb);
                let actions: Vec<usize> = mb.iter().map(|&i| buffer.records[i].action).collect();
                let old: Vec<f64> = mb.iter().map(|&i| buffer.records[i].log_prob).collect();
                let adv: Vec<f64> = mb.iter().map(|&i| buffer.advantages[i]).collect();
                let net = &mut bundle.actors_mut()[k];
                let (s, mut g) = actor_objective(
                    &net.params,
                    ActorBatch {
                        observations: obs.view(),
                        actions: &actions,
                        old_log_probs: &old,
                        advantages: &adv,
                    },
                    cfg.clip,
                    cfg.entropy_coef,
                )?;
                if epoch == 0 && b == 0 {
                    initial.push(s.clip_fraction);
                }
                g.iter_mut().for_each(|x| *x = -*x);
                clip_grad_norm(&mut g, cfg.max_grad_norm);
                net.adam.update(&mut net.params, &g)?;
                stats.actor_objective += s.objective;
                stats.mean_ratio += s.mean_ratio;
                stats.clip_fraction += s.clip_fraction;
                stats.entropy += s.entropy;
                stats.actor_steps += 1;
            }
        }
        for (k, idx) in by_critic.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            for mb in minibatches(idx, cfg.minibatches, rng) {
                let globals = buffer.globals(&mb);
                let ret: Vec<f64> = mb.iter().map(|&i| targets[i]).collect();
                let old: Vec<f64> = mb.iter().map(|&i| old_values[i]).collect();
                let net = &mut bundle.critics_mut()[k];
                let (loss, mut g) = critic_loss(
                    &net.params,
                    CriticBatch {
                        globals: globals.view(),
                        returns: &ret,
                        old_values: &old,
                    },
                    cfg.clip,
                )?;
                clip_grad_norm(&mut g, cfg.max_grad_norm);
                net.adam.update(&mut net.params, &g)?;
                stats.critic_loss += loss;
                stats.critic_steps += 1;
            }
        }
    }
    let a = stats.actor_steps.max(1) as f64;
    stats.actor_objective /= a;
    stats.mean_ratio /= a;
    stats.clip_fraction /= a;
    stats.entropy /= a;
    stats.critic_loss /= stats.critic_steps.max(1) as f64;
    stats.initial_clip_fraction = initial.iter().sum::<f64>() / initial.len().max(1) as f64;
    Ok(stats)
}

fn records_by<F: Fn(usize) -> usize>(buffer: &RolloutBuffer, owner: F, count: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); count];
    for (i, r) in buffer.records.iter().enumerate() {
        out[owner(r.agent)].push(i);
    }
    out
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub summed_reward: f64,
    pub collisions: usize,
    pub mean_risk: f64,
    pub emv_speed: f64,
    pub av_speed: f64,
}

impl CurvePoint {
    pub fn from_summary(iteration: usize, s: &EpisodeSummary) -> Self {
        Self {
            iteration,
            summed_reward: s.summed_reward,
            collisions: s.collisions,
            mean_risk: s.mean_risk(),
            emv_speed: s.emv_speed(),
            av_speed: s.av_speed(),
        }
    }
}

/// Passed to the per-iteration callback of [`train_with`].
pub struct TrainProgress<'a> {
    pub iteration: usize,
    pub point: &'a CurvePoint,
    pub stats: &'a UpdateStats,
    pub bundle: &'a PolicyBundle,
    pub env_config: &'a EnvConfig,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: PolicyBundle,
    pub env_config: EnvConfig,
    pub curve: Vec<CurvePoint>,
    pub env_steps: usize,
    pub wall_seconds: f64,
}

impl TrainOutcome {
    /// Joint environment steps per wall-clock second, updates included.
    pub fn steps_per_sec(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.env_steps as f64 / self.wall_seconds
        } else {
            0.0
        }
    }
}

/// The environment configuration a run actually uses: the horizon follows
/// `steps` and the reward mode follows the training mode.
pub fn resolved_env_config(env_cfg: &EnvConfig, cfg: &TrainConfig) -> EnvConfig {
    EnvConfig {
        horizon: cfg.steps,
        mode: cfg.mode,
        ..env_cfg.clone()
    }
}

pub fn train(env_cfg: &EnvConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(env_cfg, cfg, |_| Ok(()))
}

/// Collect, estimate advantages and update for `cfg.episodes` iterations,
/// calling `on_iteration` after each one.
pub fn train_with<F>(env_cfg: &EnvConfig, cfg: &TrainConfig, mut on_iteration: F) -> Result<TrainOutcome>
where
    F: FnMut(&TrainProgress<'_>) -> Result<()>,
{
    cfg.validate()?;
    let env_cfg = resolved_env_config(env_cfg, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut env = Env::new(env_cfg.clone(), rng.random())?;
    let mut bundle = PolicyBundle::for_env(&env_cfg, cfg, &mut rng)?;
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut env_steps = 0;
    let start = Instant::now();
    for iteration in 0..cfg.episodes {
        env.reset(rng.random());
        let (mut buffer, summary) = collect_rollout(&mut env, &bundle, cfg.steps, &mut rng)?;
        env_steps += summary.steps;
        buffer.compute_gae(cfg.gamma, cfg.lambda)?;
        buffer.normalize_advantages();
        let stats = ppo_update(&buffer, &mut bundle, cfg, &mut rng)?;
        let point = CurvePoint::from_summary(iteration, &summary);
        curve.push(point);
        on_iteration(&TrainProgress {
            iteration,
            point: &point,
            stats: &stats,
            bundle: &bundle,
            env_config: &env_cfg,
        })?;
    }
    Ok(TrainOutcome {
        bundle,
        env_config: env_cfg,
        curve,
        env_steps,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Mode;

    fn tiny() -> (EnvConfig, TrainConfig) {
        let env_cfg = EnvConfig {
            agents: 4,
            ..EnvConfig::default()
        };
        let cfg = TrainConfig {
            episodes: 2,
            steps: 20,
            ppo_epochs: 2,
            hidden: vec![16, 16],
            seed: 3,
            ..TrainConfig::default()
        };
        (env_cfg, cfg)
    }

    #[test]
    fn rollout_shape_and_routing() {
        let (env_cfg, cfg) = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bundle = PolicyBundle::for_env(&env_cfg, &cfg, &mut rng).unwrap();
        let mut env = Env::new(env_cfg, 2).unwrap();
        let (buf, summary) = collect_rollout(&mut env, &bundle, 20, &mut rng).unwrap();
        assert_eq!(buf.len(), 80);
        assert_eq!(summary.steps, 20);
        assert!(buf.records.iter().all(|r| r.log_prob.is_finite()));
        assert!(buf.record(19, 3).done && !buf.record(18, 3).done);
        assert_eq!(buf.record(5, 2).agent, 2);
    }

    #[test]
    fn update_counts_and_first_clip() {
        let (env_cfg, cfg) = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bundle = PolicyBundle::for_env(&env_cfg, &cfg, &mut rng).unwrap();
        let mut env = Env::new(env_cfg, 2).unwrap();
        let (mut buf, _) = collect_rollout(&mut env, &bundle, 20, &mut rng).unwrap();
        assert!(ppo_update(&buf, &mut bundle, &cfg, &mut rng).is_err());
        buf.compute_gae(cfg.gamma, cfg.lambda).unwrap();
        buf.normalize_advantages();
        let s = ppo_update(&buf, &mut bundle, &cfg, &mut rng).unwrap();
        // Two actors and one critic, each with 4 minibatches per epoch.
        assert_eq!(s.actor_steps, 2 * 2 * 4);
        assert_eq!(s.critic_steps, 2 * 4);
        assert_eq!(s.initial_clip_fraction, 0.0);
        assert!((0.0..=1.0).contains(&s.clip_fraction));
    }

    #[test]
    fn training_is_deterministic() {
        let (env_cfg, cfg) = tiny();
        let a = train(&env_cfg, &cfg).unwrap();
        let b = train(&env_cfg, &cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        for (x, y) in a.bundle.actors().iter().zip(b.bundle.actors()) {
            assert_eq!(x.params.as_slice(), y.params.as_slice());
        }
        assert_eq!(a.curve.len(), 2);
    }

    #[test]
    fn competitive_training_has_networks_per_agent() {
        let (env_cfg, mut cfg) = tiny();
        cfg.mode = Mode::Competitive;
        cfg.episodes = 1;
        let out = train(&env_cfg, &cfg).unwrap();
        assert_eq!(out.bundle.actors().len(), 4);
        assert_eq!(out.bundle.critics().len(), 4);
        assert_eq!(out.env_config.mode, Mode::Competitive);
    }

    #[test]
    fn grad_norm_clip() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
    }
}
