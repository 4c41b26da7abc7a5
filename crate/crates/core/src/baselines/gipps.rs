//! Gipps car-following with rule-based lane changes gated by the RSS
//! longitudinal safe distance.

use serde::{Deserialize, Serialize};

use crate::env::{Action, AgentState, Env, Role};
use crate::error::{Error, Result};
use crate::risk::{lon_safe_distance, PairKinematics, RiskParams};

use super::{nearest_longitudinal, DrivingPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GippsParams {
    /// Reaction time `T` (s).
    pub reaction_time: f64,
    /// Desired speed; `None` uses each vehicle's maximum speed.
    pub desired_speed: Option<f64>,
    /// Maximum acceleration `a_n` (m/s²).
    pub max_accel: f64,
    /// Most severe braking the follower applies, as a magnitude (m/s²).
    pub own_brake: f64,
    /// Follower's estimate of the leader's most severe braking (m/s²).
    pub leader_brake_estimate: f64,
    /// Bumper gap kept at standstill (m).
    pub stop_gap: f64,
    /// Speed advantage required before changing lanes (m/s).
    pub lane_gain_threshold: f64,
}

impl Default for GippsParams {
    fn default() -> Self {
        Self {
            reaction_time: 0.7,
            desired_speed: None,
            max_accel: 2.5,
            own_brake: 3.0,
            leader_brake_estimate: 3.0,
            stop_gap: 2.0,
            lane_gain_threshold: 1.0,
        }
    }
}

impl GippsParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("reaction_time", self.reaction_time),
            ("max_accel", self.max_accel),
            ("own_brake", self.own_brake),
            ("leader_brake_estimate", self.leader_brake_estimate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("gipps.{name} must be positive")));
            }
        }
        if let Some(vd) = self.desired_speed {
            if !(vd > 0.0) {
                return Err(Error::config("gipps.desired_speed must be positive"));
            }
        }
        if !(self.stop_gap >= 0.0 && self.lane_gain_threshold >= 0.0) {
            return Err(Error::config("gipps.stop_gap and lane_gain_threshold must be >= 0"));
        }
        Ok(())
    }
}

/// Free-road branch: speed reached after one reaction time.
pub fn gipps_accel_speed(v: f64, desired: f64, p: &GippsParams) -> f64 {
    let x = v / desired;
    v + 2.5 * p.max_accel * p.reaction_time * (1.0 - x) * (0.025 + x).max(0.0).sqrt()
}

/// Braking branch for a leader at bumper gap `gap` moving at `v_leader`.
/// Returns `None` when the discriminant is negative.
pub fn gipps_brake_speed(v: f64, gap: f64, v_leader: f64, p: &GippsParams) -> Option<f64> {
    let t = p.reaction_time;
    let d = p.own_brake;
    let disc =
        t * t * d * d + d * (2.0 * (gap - p.stop_gap) - t * v + v_leader * v_leader / p.leader_brake_estimate);
    (disc >= 0.0).then(|| -t * d + disc.sqrt())
}

/// Gipps speed for `follower` one reaction time ahead, given the leader (if
/// any) as `(speed, bumper gap)`. Clamped to the follower's speed envelope.
pub fn gipps_velocity(follower: &AgentState, leader: Option<(f64, f64)>, p: &GippsParams) -> f64 {
    let spec = &follower.spec;
    let desired = p.desired_speed.unwrap_or(spec.v_max);
    let v_acc = gipps_accel_speed(follower.v, desired, p);
    let v = match leader {
        Some((v_leader, gap)) => match gipps_brake_speed(follower.v, gap, v_leader, p) {
            Some(v_dec) => v_acc.min(v_dec),
            None => spec.v_min,
        },
        None => v_acc,
    };
    v.clamp(spec.v_min, spec.v_max)
}

fn leader_view(env: &Env, i: usize, lane: usize) -> Option<(f64, f64)> {
    env.leader_in_lane(i, lane)
        .map(|(j, gap)| (env.agents()[j].v, gap))
}

fn lon_min(v_rear: f64, v_front: f64, risk: &RiskParams) -> f64 {
    let k = PairKinematics {
        v_rear,
        v_front,
        v_left: 0.0,
        v_right: 0.0,
        d_lon: 0.0,
        d_lat: 0.0,
    };
    lon_safe_distance(&k, risk, false)
}

/// Both post-change gaps exceed the RSS safe distance.
fn lane_is_safe(env: &Env, i: usize, lane: usize) -> bool {
    let me = &env.agents()[i];
    let risk = &env.config().risk;
    let lead_ok = env.leader_in_lane(i, lane).is_none_or(|(j, gap)| {
        gap > 0.0 && gap > lon_min(me.v, env.agents()[j].v, risk)
    });
    let follow_ok = env.follower_in_lane(i, lane).is_none_or(|(j, gap)| {
        gap > 0.0 && gap > lon_min(env.agents()[j].v, me.v, risk)
    });
    lead_ok && follow_ok
}

fn change_toward(from: usize, to: usize) -> Action {
    if to > from {
        Action::ChangeLeft
    } else {
        Action::ChangeRight
    }
}

/// Rule-based lane choice.
///
/// An AV with the EMV approaching from behind in its lane yields, to the right
/// when that is safe and otherwise to the left. Failing that, the agent moves
/// to the safe adjacent lane whose predicted Gipps speed beats the current lane
/// by the configured threshold, preferring the larger gain and then the left.
pub fn gipps_lane_decision(env: &Env, i: usize, p: &GippsParams) -> Action {
    let me = &env.agents()[i];
    if me.lane_change.is_some() {
        return Action::Keep;
    }
    let lanes = env.track().lanes;
    let lane = me.lane;
    let right = lane.checked_sub(1);
    let left = (lane + 1 < lanes).then_some(lane + 1);

    if me.role() == Role::Av {
        let emv = env.emv();
        let behind = env.track().forward_arc(emv.s, me.s);
        if emv.occupies_lane(lane) && behind <= me.spec.perception_radius + 0.5 * (me.spec.length + emv.spec.length) {
            for target in [right, left].into_iter().flatten() {
                if lane_is_safe(env, i, target) {
                    return change_toward(lane, target);
                }
            }
        }
    }

    let current = gipps_velocity(me, leader_view(env, i, lane), p);
    let mut best: Option<(f64, usize)> = None;
    for target in [left, right].into_iter().flatten() {
        let gain = gipps_velocity(me, leader_view(env, i, target), p) - current;
        if gain > p.lane_gain_threshold
            && lane_is_safe(env, i, target)
            && best.is_none_or(|(g, _)| gain > g)
        {
            best = Some((gain, target));
        }
    }
    best.map_or(Action::Keep, |(_, target)| change_toward(lane, target))
}

/// Gipps speed control plus the lane rules.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GippsPolicy {
    pub params: GippsParams,
}

impl GippsPolicy {
    pub fn new(params: GippsParams) -> Self {
        Self { params }
    }

    /// Longitudinal command whose acceleration is nearest the one that reaches
    /// the Gipps speed within a reaction time.
    pub fn speed_action(&self, env: &Env, i: usize) -> Action {
        let me = &env.agents()[i];
        let target = gipps_velocity(me, leader_view(env, i, me.lane), &self.params);
        nearest_longitudinal((target - me.v) / self.params.reaction_time)
    }
}

impl DrivingPolicy for GippsPolicy {
    fn act(&self, env: &Env, i: usize) -> Action {
        match gipps_lane_decision(env, i, &self.params) {
            Action::Keep => self.speed_action(env, i),
            change => change,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, VehicleSpec, EMV_INDEX};

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
    fn desired_speed_is_a_fixed_point() {
        let p = GippsParams::default();
        assert_eq!(gipps_accel_speed(20.0, 20.0, &p), 20.0);
    }

    #[test]
    fn free_road_value() {
        let p = GippsParams::default();
        // 10 + 2.5 * 2.5 * 0.7 * 0.5 * sqrt(0.525)
        let expected = 10.0 + 2.1875 * 0.525f64.sqrt();
        let v = gipps_velocity(&agent(1, 0.0, 0, 10.0), None, &p);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 11.585).abs() < 1e-3);
    }

    #[test]
    fn far_stationary_leader_does_not_bind() {
        let p = GippsParams::default();
        let me = agent(1, 0.0, 0, 10.0);
        let free = gipps_velocity(&me, None, &p);
        assert_eq!(gipps_velocity(&me, Some((0.0, 1.0e4)), &p), free);
    }

    #[test]
    fn never_exceeds_either_branch() {
        let p = GippsParams::default();
        for v in [7.0, 12.0, 19.0] {
            for gap in [1.0, 5.0, 20.0, 80.0] {
                for vl in [0.0, 7.0, 20.0] {
                    let me = agent(1, 0.0, 0, v);
                    let out = gipps_velocity(&me, Some((vl, gap)), &p);
                    let acc = gipps_accel_speed(v, 20.0, &p).clamp(7.0, 20.0);
                    assert!(out <= acc + 1e-12);
                    if let Some(dec) = gipps_brake_speed(v, gap, vl, &p) {
                        assert!(out <= dec.max(7.0) + 1e-12);
                    } else {
                        assert_eq!(out, 7.0);
                    }
                }
            }
        }
    }

    #[test]
    fn overtakes_into_empty_lane() {
        let env = scene(vec![agent(0, 300.0, 0, 20.0), agent(1, 100.0, 0, 12.0), agent(2, 115.0, 0, 7.0)]);
        assert_eq!(gipps_lane_decision(&env, 1, &GippsParams::default()), Action::ChangeLeft);
    }

    #[test]
    fn occupied_lane_blocks_change() {
        let env = scene(vec![
            agent(0, 300.0, 0, 20.0),
            agent(1, 100.0, 0, 12.0),
            agent(2, 115.0, 0, 7.0),
            agent(3, 92.0, 1, 12.0),
        ]);
        assert_eq!(gipps_lane_decision(&env, 1, &GippsParams::default()), Action::Keep);
    }

    #[test]
    fn yields_to_emv() {
        let mut cfg = EnvConfig::default();
        cfg.track.lanes = 3;
        let mut env = Env::new(cfg, 0).unwrap();
        env.set_agents(vec![agent(0, 90.0, 1, 25.0), agent(1, 100.0, 1, 8.0)]).unwrap();
        assert_eq!(gipps_lane_decision(&env, 1, &GippsParams::default()), Action::ChangeRight);
    }

    #[test]
    fn policy_is_pure() {
        let env = Env::new(EnvConfig::default(), 3).unwrap();
        let pol = GippsPolicy::default();
        for i in 0..env.num_agents() {
            assert_eq!(pol.act(&env, i), pol.act(&env, i));
        }
    }
}
