//! Multi-agent ring-road environment with one emergency vehicle.
//!
//! Vehicles move along a closed loop at a fixed integration step, choose one
//! of seven high-level commands per step, and observe only neighbours inside
//! their perception radius. Collisions are resolved in place and counted; the
//! episode always runs to its horizon.

mod action;
mod config;
mod reward;
mod state;
mod trace;

pub use action::Action;
pub use config::{EnvConfig, Mode, RewardWeights, Role, TrackConfig, VehicleSpec};
pub use reward::{compute_reward, EmvStatus};
pub use state::{AgentState, LaneChange};
pub use trace::{TraceRecord, TraceWriter};

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::risk::assess_pair;
use config::NEIGHBOUR_FEATURES;

/// Index of the emergency vehicle in the agent list.
pub const EMV_INDEX: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionEvent {
    pub step: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub risks: Vec<f64>,
    pub collisions: Vec<CollisionEvent>,
    pub began_lane_change: Vec<bool>,
    /// One row per agent.
    pub observations: Array2<f64>,
    /// One row per agent; privileged critic input.
    pub global: Array2<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    agents: Vec<AgentState>,
    t: usize,
}

impl Env {
    /// Builds an environment and places the agents for `seed`.
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        config.check_capacity()?;
        let mut env = Self {
            config,
            agents: Vec::new(),
            t: 0,
        };
        env.reset(seed);
        Ok(env)
    }

    /// Random placement on distinct spawn slots with uniform random speeds.
    pub fn reset(&mut self, seed: u64) {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slot = cfg.slot_length();
        let per_lane = cfg.slots_per_lane();
        let offsets: Vec<f64> = (0..cfg.track.lanes)
            .map(|_| rng.random_range(0.0..slot))
            .collect();
        let slots = sample(&mut rng, cfg.capacity(), cfg.agents);
        self.agents = slots
            .iter()
            .enumerate()
            .map(|(id, k)| {
                let lane = k / per_lane;
                let spec = if id == EMV_INDEX { cfg.emv } else { cfg.av };
                let s = cfg
                    .track
                    .wrap(offsets[lane] + (k % per_lane) as f64 * slot + 0.5 * slot);
                let v = if spec.v_max > spec.v_min {
                    rng.random_range(spec.v_min..=spec.v_max)
                } else {
                    spec.v_min
                };
                AgentState {
                    id,
                    spec,
                    s,
                    lane,
                    v,
                    lane_change: None,
                    collided_this_step: false,
                }
            })
            .collect();
        self.t = 0;
    }

    /// Replaces the agent states, e.g. to set up a scripted scene.
    pub fn set_agents(&mut self, agents: Vec<AgentState>) -> Result<()> {
        let track = self.config.track;
        if agents.first().map(|a| a.is_emv()) != Some(true)
            || agents.iter().skip(1).any(|a| a.is_emv())
        {
            return Err(Error::config("exactly one EMV is required, at index 0"));
        }
        for a in &agents {
            if !(a.s >= 0.0 && a.s < track.loop_length) || a.lane >= track.lanes {
                return Err(Error::config(format!("agent {} is off the track", a.id)));
            }
            if let Some(lc) = a.lane_change {
                if lc.target >= track.lanes || lc.target.abs_diff(a.lane) != 1 {
                    return Err(Error::config(format!(
                        "agent {} has an invalid lane-change target",
                        a.id
                    )));
                }
            }
        }
        self.config.agents = agents.len();
        self.agents = agents;
        self.t = 0;
        Ok(())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn track(&self) -> &TrackConfig {
        &self.config.track
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Steps taken since reset.
    pub fn step_index(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.horizon
    }

    pub fn emv(&self) -> &AgentState {
        &self.agents[EMV_INDEX]
    }

    /// Advances all agents by one integration step.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if actions.len() != self.agents.len() {
            return Err(Error::ActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        if self.is_done() {
            return Err(Error::EpisodeDone);
        }
        let track = self.config.track;
        let total_lc = self.config.lane_change_steps;
        let mut began = vec![false; self.agents.len()];

        for (agent, (&action, began)) in self.agents.iter_mut().zip(actions.iter().zip(&mut began)) {
            agent.collided_this_step = false;
            let offset = action.lane_offset();
            if offset != 0 && agent.lane_change.is_none() {
                let target = agent.lane as i64 + i64::from(offset);
                if (0..track.lanes as i64).contains(&target) {
                    agent.lane_change = Some(LaneChange {
                        target: target as usize,
                        remaining: total_lc,
                        total: total_lc,
                    });
                    *began = true;
                }
            }
            agent.v = (agent.v + action.acceleration() * track.dt)
                .clamp(agent.spec.v_min, agent.spec.v_max);
            agent.s = track.wrap(agent.s + agent.v * track.dt);
            if let Some(lc) = agent.lane_change.as_mut() {
                lc.remaining -= 1;
                if lc.remaining == 0 {
                    agent.lane = lc.target;
                    agent.lane_change = None;
                }
            }
        }

        let collisions = self.detect_collisions();
        self.t += 1;
        let risks = self.agent_risks();

        let emv = self.emv();
        let emv_status = EmvStatus {
            speed_fraction: emv.v / emv.spec.v_max,
            began_lane_change: began[EMV_INDEX],
        };
        let rewards = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                compute_reward(
                    a,
                    risks[i],
                    a.collided_this_step,
                    began[i],
                    &emv_status,
                    &self.config.reward,
                    self.config.mode,
                )
            })
            .collect();

        Ok(StepOutcome {
            rewards,
            risks,
            collisions,
            began_lane_change: began,
            observations: self.observations(),
            global: self.global_features(),
            done: self.is_done(),
        })
    }

    /// Finds overlapping footprints, resolves each pair and reports it.
    ///
    /// Both vehicles of a pair drop to their minimum speed and the rear one is
    /// moved back to the post-collision gap behind the front one.
    pub fn detect_collisions(&mut self) -> Vec<CollisionEvent> {
        let track = self.config.track;
        let n = self.agents.len();
        let mut events = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let arc = track.signed_arc(a.s, b.s);
                if arc.abs() >= 0.5 * (a.spec.length + b.spec.length) {
                    continue;
                }
                let (alo, ahi) = a.lateral_extent(&track);
                let (blo, bhi) = b.lateral_extent(&track);
                if !(alo < bhi && blo < ahi) {
                    continue;
                }
                events.push(CollisionEvent { step: self.t, a: i, b: j });
                let (rear, front) = if arc >= 0.0 { (i, j) } else { (j, i) };
                let front_s = self.agents[front].s;
                let offset = 0.5 * (self.agents[front].spec.length + self.agents[rear].spec.length)
                    + self.config.post_collision_gap;
                for k in [i, j] {
                    let agent = &mut self.agents[k];
                    agent.v = agent.spec.v_min;
                    agent.collided_this_step = true;
                }
                self.agents[rear].s = track.wrap(front_s - offset);
            }
        }
        events
    }

    /// Worst unified risk per agent over the pairs inside its perception radius.
    pub fn agent_risks(&self) -> Vec<f64> {
        let track = self.config.track;
        let n = self.agents.len();
        let mut risks = vec![0.0f64; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let dist = track.signed_arc(a.s, b.s).abs();
                let seen_by_a = dist <= a.spec.perception_radius;
                let seen_by_b = dist <= b.spec.perception_radius;
                if !(seen_by_a || seen_by_b) {
                    continue;
                }
                let r = assess_pair(a, b, &track, &self.config.risk).r;
                if seen_by_a {
                    risks[i] = risks[i].max(r);
                }
                if seen_by_b {
                    risks[j] = risks[j].max(r);
                }
            }
        }
        risks
    }

    /// Neighbours of `i` inside its perception radius, nearest first.
    fn neighbours(&self, i: usize) -> Vec<(f64, usize)> {
        let me = &self.agents[i];
        let track = &self.config.track;
        let mut near: Vec<(f64, usize)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .filter_map(|(j, other)| {
                let d = track.signed_arc(me.s, other.s).abs();
                (d <= me.spec.perception_radius).then_some((d, j))
            })
            .collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        near
    }

    /// Writes agent `i`'s local observation into `out`.
    pub fn write_observation(&self, i: usize, out: &mut [f64]) {
        let cfg = &self.config;
        let track = &cfg.track;
        debug_assert_eq!(out.len(), cfg.observation_dim());
        out.fill(0.0);
        let me = &self.agents[i];
        out[0] = me.v / me.spec.v_max;
        match me.lane_change {
            Some(lc) => {
                let p = lc.progress();
                out[1 + me.lane] = 1.0 - p;
                out[1 + lc.target] = p;
            }
            None => out[1 + me.lane] = 1.0,
        }
        let phase = std::f64::consts::TAU * me.s / track.loop_length;
        out[1 + track.lanes] = phase.sin();
        out[2 + track.lanes] = phase.cos();

        let base = 3 + track.lanes;
        let lane_scale = (track.lanes - 1) as f64;
        let speed_scale = cfg.speed_scale();
        for (slot, &(_, j)) in self.neighbours(i).iter().take(cfg.neighbours).enumerate() {
            let other = &self.agents[j];
            let f = &mut out[base + slot * NEIGHBOUR_FEATURES..base + (slot + 1) * NEIGHBOUR_FEATURES];
            f[0] = 1.0;
            f[1] = (track.signed_arc(me.s, other.s) / me.spec.perception_radius).clamp(-1.0, 1.0);
            f[2] = ((other.v - me.v) / speed_scale).clamp(-1.0, 1.0);
            f[3] = ((other.lane_position() - me.lane_position()) / lane_scale).clamp(-1.0, 1.0);
            f[4] = if other.is_emv() { 1.0 } else { 0.0 };
        }
    }

    pub fn observe(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.config.observation_dim()];
        self.write_observation(i, &mut out);
        out
    }

    pub fn observations(&self) -> Array2<f64> {
        let dim = self.config.observation_dim();
        let mut m = Array2::zeros((self.agents.len(), dim));
        for (i, mut row) in m.rows_mut().into_iter().enumerate() {
            self.write_observation(i, row.as_slice_mut().expect("row-major"));
        }
        m
    }

    /// Critic input: the local observation followed by EMV speed, signed ring
    /// distance to the EMV, mean AV speed, traffic density and an own-role flag.
    pub fn global_features(&self) -> Array2<f64> {
        let cfg = &self.config;
        let obs_dim = cfg.observation_dim();
        let emv = self.emv();
        let (sum, count) = self
            .agents
            .iter()
            .filter(|a| !a.is_emv())
            .fold((0.0, 0usize), |(s, c), a| (s + a.v, c + 1));
        let mean_av = if count > 0 { sum / count as f64 } else { 0.0 };
        let density = self.agents.len() as f64 / cfg.capacity() as f64;

        let mut m = Array2::zeros((self.agents.len(), cfg.global_dim()));
        for (i, mut row) in m.rows_mut().into_iter().enumerate() {
            let row = row.as_slice_mut().expect("row-major");
            self.write_observation(i, &mut row[..obs_dim]);
            let me = &self.agents[i];
            row[obs_dim] = emv.v / cfg.emv.v_max;
            row[obs_dim + 1] = cfg.track.signed_arc(me.s, emv.s) / cfg.track.loop_length;
            row[obs_dim + 2] = mean_av / cfg.av.v_max;
            row[obs_dim + 3] = density;
            row[obs_dim + 4] = if me.is_emv() { 1.0 } else { 0.0 };
        }
        m
    }

    /// Bumper gap from agent `i` to the next vehicle ahead in its own lane.
    pub fn leading_gap(&self, i: usize) -> Option<f64> {
        let me = &self.agents[i];
        let track = &self.config.track;
        self.agents
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && o.lane == me.lane)
            .map(|(_, o)| track.forward_arc(me.s, o.s) - 0.5 * (me.spec.length + o.spec.length))
            .min_by(f64::total_cmp)
    }

    /// Nearest vehicle ahead occupying `lane`, as (index, bumper gap).
    pub fn leader_in_lane(&self, i: usize, lane: usize) -> Option<(usize, f64)> {
        self.nearest_in_lane(i, lane, true)
    }

    /// Nearest vehicle behind occupying `lane`, as (index, bumper gap).
    pub fn follower_in_lane(&self, i: usize, lane: usize) -> Option<(usize, f64)> {
        self.nearest_in_lane(i, lane, false)
    }

    fn nearest_in_lane(&self, i: usize, lane: usize, ahead: bool) -> Option<(usize, f64)> {
        let me = &self.agents[i];
        let track = &self.config.track;
        self.agents
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && o.occupies_lane(lane))
            .map(|(j, o)| {
                let arc = if ahead {
                    track.forward_arc(me.s, o.s)
                } else {
                    track.forward_arc(o.s, me.s)
                };
                (j, arc - 0.5 * (me.spec.length + o.spec.length))
            })
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(id: usize, s: f64, lane: usize, v: f64) -> AgentState {
        AgentState {
            id,
            spec: if id == EMV_INDEX { VehicleSpec::emv() } else { VehicleSpec::av() },
            s,
            lane,
            v,
            lane_change: None,
            collided_this_step: false,
        }
    }

    fn scene(agents: Vec<AgentState>) -> Env {
        let mut env = Env::new(EnvConfig::default(), 0).unwrap();
        env.set_agents(agents).unwrap();
        env
    }

    #[test]
    fn reset_is_seeded() {
        let cfg = EnvConfig::default();
        let a = Env::new(cfg.clone(), 1).unwrap();
        let b = Env::new(cfg.clone(), 1).unwrap();
        let c = Env::new(cfg, 2).unwrap();
        assert_eq!(a.agents(), b.agents());
        assert_ne!(a.agents(), c.agents());
        assert_eq!(a.agents().iter().filter(|x| x.is_emv()).count(), 1);
    }

    #[test]
    fn reset_respects_spawn_gap() {
        let cfg = EnvConfig {
            agents: 60,
            ..EnvConfig::default()
        };
        for seed in 0..20 {
            let env = Env::new(cfg.clone(), seed).unwrap();
            for i in 0..env.num_agents() {
                if let Some(g) = env.leading_gap(i) {
                    assert!(g >= cfg.spawn_gap - 1e-9, "seed {seed}: gap {g}");
                }
                let a = &env.agents()[i];
                assert!(a.v >= a.spec.v_min && a.v <= a.spec.v_max);
            }
        }
    }

    #[test]
    fn over_capacity_is_an_error() {
        let cfg = EnvConfig {
            agents: 1000,
            ..EnvConfig::default()
        };
        assert!(matches!(Env::new(cfg, 1), Err(Error::Capacity { .. })));
    }

    #[test]
    fn keep_integrates_position() {
        let mut env = scene(vec![agent(0, 200.0, 1, 10.0), agent(1, 50.0, 0, 10.0)]);
        env.step(&[Action::Keep, Action::Keep]).unwrap();
        assert_eq!(env.agents()[1].v, 10.0);
        assert!((env.agents()[1].s - 51.0).abs() < 1e-12);
    }

    #[test]
    fn speed_is_clamped() {
        let mut env = scene(vec![agent(0, 200.0, 1, 10.0), agent(1, 50.0, 0, 19.9)]);
        env.step(&[Action::Keep, Action::HeavyAccelerate]).unwrap();
        assert_eq!(env.agents()[1].v, 20.0);
        env.step(&[Action::Keep, Action::HeavyBrake]).unwrap();
        assert!((env.agents()[1].v - 19.7).abs() < 1e-12);
    }

    #[test]
    fn position_wraps() {
        let mut env = scene(vec![agent(0, 200.0, 1, 10.0), agent(1, 399.95, 0, 10.0)]);
        env.step(&[Action::Keep, Action::Keep]).unwrap();
        assert!((env.agents()[1].s - 0.95).abs() < 1e-9);
    }

    #[test]
    fn invalid_lane_change_is_keep() {
        let mut env = scene(vec![agent(0, 200.0, 1, 10.0), agent(1, 50.0, 0, 10.0)]);
        let out = env.step(&[Action::ChangeLeft, Action::ChangeRight]).unwrap();
        // EMV is already in the leftmost lane, AV in the rightmost.
        assert_eq!(out.began_lane_change, vec![false, false]);
        assert!(env.agents().iter().all(|a| a.lane_change.is_none()));
    }

    #[test]
    fn lane_change_takes_configured_steps() {
        let mut env = scene(vec![agent(0, 200.0, 1, 10.0), agent(1, 50.0, 0, 10.0)]);
        let out = env.step(&[Action::Keep, Action::ChangeLeft]).unwrap();
        assert!(out.began_lane_change[1]);
        for k in 1..10 {
            assert_eq!(env.agents()[1].lane, 0, "step {k}");
            let out = env.step(&[Action::Keep, Action::ChangeLeft]).unwrap();
            assert!(!out.began_lane_change[1], "new command accepted mid-manoeuvre");
        }
        assert_eq!(env.agents()[1].lane, 1);
        assert!(env.agents()[1].lane_change.is_none());
    }

    #[test]
    fn wrong_action_count() {
        let mut env = scene(vec![agent(0, 200.0, 1, 10.0), agent(1, 50.0, 0, 10.0)]);
        assert!(matches!(
            env.step(&[Action::Keep]),
            Err(Error::ActionCount { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn episode_ends_at_horizon() {
        let mut cfg = EnvConfig::default();
        cfg.horizon = 3;
        let mut env = Env::new(cfg, 5).unwrap();
        let keep = vec![Action::Keep; env.num_agents()];
        assert!(!env.step(&keep).unwrap().done);
        assert!(!env.step(&keep).unwrap().done);
        assert!(env.step(&keep).unwrap().done);
        assert!(matches!(env.step(&keep), Err(Error::EpisodeDone)));
    }

    #[test]
    fn collision_cases() {
        let mut env = scene(vec![agent(0, 300.0, 1, 10.0), agent(1, 50.0, 0, 10.0), agent(2, 50.0, 0, 12.0)]);
        let ev = env.detect_collisions();
        assert_eq!(ev.len(), 1);
        let a = env.agents();
        assert_eq!(a[1].v, 7.0);
        assert_eq!(a[2].v, 7.0);
        let gap = env.track().forward_arc(a[2].s, a[1].s).min(env.track().forward_arc(a[1].s, a[2].s)) - 4.0;
        assert!((gap - 2.0).abs() < 1e-9);

        let mut env = scene(vec![agent(0, 300.0, 1, 10.0), agent(1, 50.0, 0, 10.0), agent(2, 50.0, 1, 10.0)]);
        assert!(env.detect_collisions().is_empty());

        let mut env = scene(vec![agent(0, 300.0, 1, 10.0), agent(1, 50.0, 0, 10.0), agent(2, 54.1, 0, 10.0)]);
        assert!(env.detect_collisions().is_empty());
    }

    #[test]
    fn lane_changer_blocks_both_lanes() {
        let mut changer = agent(2, 50.0, 0, 10.0);
        changer.lane_change = Some(LaneChange { target: 1, remaining: 9, total: 10 });
        let mut env = scene(vec![agent(0, 300.0, 1, 10.0), agent(1, 51.0, 1, 10.0), changer]);
        assert_eq!(env.detect_collisions().len(), 1);
    }

    #[test]
    fn observation_neighbours() {
        let env = scene(vec![agent(0, 115.0, 1, 30.0), agent(1, 100.0, 0, 10.0), agent(2, 125.0, 0, 10.0)]);
        let o = env.observe(1);
        assert_eq!(o.len(), 35);
        // Nearest (EMV at 15 m) comes first.
        let base = 5;
        assert_eq!(o[base], 1.0);
        assert!((o[base + 1] - 0.75).abs() < 1e-12);
        assert_eq!(o[base + 4], 1.0);
        // Vehicle at 25 m is outside the 20 m radius.
        assert!(o[base + 5..].iter().all(|&x| x == 0.0));

        let lonely = scene(vec![agent(0, 300.0, 1, 30.0), agent(1, 100.0, 0, 10.0)]);
        assert!(lonely.observe(1)[base..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn global_feature_examples() {
        let mut agents = vec![agent(0, 10.0, 1, 15.0)];
        agents.extend((1..20).map(|i| agent(i, 20.0 * i as f64, (i % 2) as usize, 20.0)));
        let env = scene(agents.clone());
        let g = env.global_features();
        let d = env.config().observation_dim();
        assert_eq!(g[[0, d + 1]], 0.0);
        assert_eq!(g[[3, d + 2]], 1.0);
        let density_20 = g[[0, d + 3]];
        let mut more = agents;
        more.extend((20..40).map(|i| agent(i, 10.0 * i as f64 - 195.0, 1, 20.0)));
        let g40 = scene(more).global_features();
        assert!((g40[[0, d + 3]] - 2.0 * density_20).abs() < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let track = TrackConfig::default();
        let p = crate::risk::RiskParams::default();
        let a = agent(1, 10.0, 0, 10.0);
        let b = agent(2, 114.0, 0, 10.0);
        assert_eq!(assess_pair(&a, &b, &track, &p).r, 0.0);
        assert_eq!(assess_pair(&a, &a, &track, &p).r, 1.0);
        let c = agent(3, 12.0, 1, 10.0);
        assert_eq!(assess_pair(&a, &c, &track, &p).r, 0.0);
        let overlap = assess_pair(&a, &a, &track, &p);
        assert!(overlap.d_lon <= 0.0 && overlap.d_lat <= 0.0);
    }
}
