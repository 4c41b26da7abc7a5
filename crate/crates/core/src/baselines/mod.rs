//! Rule-based comparators: Gipps car-following and MPC cruise control.

mod gipps;
mod mpc;

pub use gipps::{
    gipps_accel_speed, gipps_brake_speed, gipps_lane_decision, gipps_velocity, GippsParams,
    GippsPolicy,
};
pub use mpc::{
    mpc_plan, mpc_rollout, mpc_search, mpc_step, stage_cost, MpcParams, MpcPolicy, MpcState,
};

use crate::env::{Action, Env};

/// A decision rule evaluated per agent from the current environment state.
pub trait DrivingPolicy {
    fn act(&self, env: &Env, agent: usize) -> Action;

    fn act_all(&self, env: &Env) -> Vec<Action> {
        (0..env.num_agents()).map(|i| self.act(env, i)).collect()
    }
}

/// Longitudinal command with acceleration nearest `accel`; ties go to the
/// lower action index.
pub fn nearest_longitudinal(accel: f64) -> Action {
    let mut best = Action::LONGITUDINAL[0];
    let mut best_err = f64::INFINITY;
    for a in Action::LONGITUDINAL {
        let err = (a.acceleration() - accel).abs();
        if err < best_err {
            best = a;
            best_err = err;
        }
    }
    best
}
