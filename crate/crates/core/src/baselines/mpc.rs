//! Discrete-action MPC adaptive cruise control on a kinematic point mass.

use serde::{Deserialize, Serialize};

use crate::env::{Action, Env};
use crate::error::{Error, Result};

use super::gipps::{gipps_lane_decision, GippsParams};
use super::DrivingPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcParams {
    pub horizon: usize,
    pub dt: f64,
    /// Desired time headway (s).
    pub headway: f64,
    /// Gap-error normaliser (m).
    pub gap_scale: f64,
    /// Relative-speed normaliser (m/s).
    pub dv_scale: f64,
    pub accel_min: f64,
    pub accel_max: f64,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            horizon: 4,
            dt: 0.1,
            headway: 1.2,
            gap_scale: 15.0,
            dv_scale: 8.0,
            accel_min: -3.0,
            accel_max: 3.0,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("mpc.horizon must be >= 1"));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("headway", self.headway),
            ("gap_scale", self.gap_scale),
            ("dv_scale", self.dv_scale),
            ("accel_max", self.accel_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("mpc.{name} must be positive")));
            }
        }
        if !(self.accel_min < 0.0) {
            return Err(Error::config("mpc.accel_min must be negative"));
        }
        Ok(())
    }
}

/// Gap to the leader, leader-minus-own speed, own speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcState {
    pub gap: f64,
    pub dv: f64,
    pub v: f64,
}

impl MpcState {
    pub fn new(gap: f64, dv: f64, v: f64) -> Self {
        Self { gap, dv, v }
    }
}

/// One step of `x' = A x + B u` with `A = [[1, dt, 0], [0, 1, 0], [0, 0, 1]]`
/// and `B = (-dt²/2, -dt, dt)`.
pub fn mpc_step(x: MpcState, u: f64, dt: f64) -> MpcState {
    MpcState {
        gap: x.gap + dt * x.dv - 0.5 * dt * dt * u,
        dv: x.dv - dt * u,
        v: x.v + dt * u,
    }
}

/// Predicted states after each control in `controls`.
pub fn mpc_rollout(x: MpcState, controls: &[f64], p: &MpcParams) -> Vec<MpcState> {
    controls
        .iter()
        .scan(x, |state, &u| {
            *state = mpc_step(*state, u, p.dt);
            Some(*state)
        })
        .collect()
}

/// Stage cost of a predicted state: normalised headway error and relative speed.
pub fn stage_cost(x: &MpcState, p: &MpcParams) -> f64 {
    let gap_err = (x.gap - x.v * p.headway) / p.gap_scale;
    let dv = x.dv / p.dv_scale;
    gap_err * gap_err + dv * dv
}

fn feasible(x: &MpcState) -> bool {
    x.gap > 0.0 && x.v > 0.0
}

/// Best action sequence as (cost, first action index into `actions`).
///
/// Exhaustive depth-first search over every sequence of length `horizon`.
/// Sequences are visited in lexicographic index order and only a strictly
/// cheaper sequence replaces the incumbent, so ties go to the lowest indices.
pub fn mpc_search(x: MpcState, p: &MpcParams, actions: &[Action]) -> Option<(f64, usize)> {
    struct Search<'a> {
        p: &'a MpcParams,
        accels: Vec<f64>,
        best: Option<(f64, usize)>,
    }

    impl Search<'_> {
        fn visit(&mut self, x: MpcState, depth: usize, cost: f64, first: usize) {
            if depth == self.p.horizon {
                if self.best.is_none_or(|(c, _)| cost < c) {
                    self.best = Some((cost, first));
                }
                return;
            }
            for k in 0..self.accels.len() {
                let next = mpc_step(x, self.accels[k], self.p.dt);
                if !feasible(&next) {
                    continue;
                }
                let first = if depth == 0 { k } else { first };
                self.visit(next, depth + 1, cost + stage_cost(&next, self.p), first);
            }
        }
    }

    let accels = actions
        .iter()
        .map(|a| a.acceleration())
        .filter(|u| *u >= p.accel_min && *u <= p.accel_max)
        .collect::<Vec<_>>();
    if accels.len() != actions.len() {
        // Out-of-bounds commands are infeasible by constraint; drop them
        // from the search while keeping index semantics.
        let allowed: Vec<Action> = actions
            .iter()
            .copied()
            .filter(|a| a.acceleration() >= p.accel_min && a.acceleration() <= p.accel_max)
            .collect();
        let (cost, k) = mpc_search(x, p, &allowed)?;
        let idx = actions.iter().position(|a| *a == allowed[k]).expect("subset");
        return Some((cost, idx));
    }
    let mut search = Search {
        p,
        accels,
        best: None,
    };
    search.visit(x, 0, 0.0, 0);
    search.best
}

/// First action of the cheapest feasible sequence; heavy braking when no
/// sequence is feasible.
pub fn mpc_plan(x: MpcState, p: &MpcParams, actions: &[Action]) -> Action {
    match mpc_search(x, p, actions) {
        Some((_, k)) => actions[k],
        None => Action::HeavyBrake,
    }
}

/// MPC cruise control for speed with the Gipps lane rules for lane changes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MpcPolicy {
    pub params: MpcParams,
    pub lane_rules: GippsParams,
}

impl MpcPolicy {
    pub fn new(params: MpcParams, lane_rules: GippsParams) -> Self {
        Self { params, lane_rules }
    }

    /// Controller state for agent `i`. Without a leader in its lane the agent
    /// tracks a virtual leader at the desired gap moving at its maximum speed.
    pub fn state_for(&self, env: &Env, i: usize) -> MpcState {
        let me = &env.agents()[i];
        match env.leader_in_lane(i, me.lane) {
            Some((j, gap)) => MpcState::new(gap, env.agents()[j].v - me.v, me.v),
            None => MpcState::new(me.v * self.params.headway, me.spec.v_max - me.v, me.v),
        }
    }
}

impl DrivingPolicy for MpcPolicy {
    fn act(&self, env: &Env, i: usize) -> Action {
        match gipps_lane_decision(env, i, &self.lane_rules) {
            Action::Keep => {
                let x = self.state_for(env, i);
                mpc_plan(x, &self.params, &Action::LONGITUDINAL)
            }
            change => change,
        }
    }
}
