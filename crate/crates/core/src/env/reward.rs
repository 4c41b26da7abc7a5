use super::config::{Mode, RewardWeights};
use super::state::AgentState;

/// What every agent's reward needs to know about the emergency vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmvStatus {
    /// Emergency-vehicle speed divided by its maximum speed.
    pub speed_fraction: f64,
    pub began_lane_change: bool,
}

/// Per-agent reward for one step.
///
/// `risk` is the agent's worst pairwise unified risk index. The
/// emergency-vehicle terms are shared by all agents in cooperative mode and
/// dropped in competitive mode.
pub fn compute_reward(
    agent: &AgentState,
    risk: f64,
    collided: bool,
    began_lane_change: bool,
    emv: &EmvStatus,
    weights: &RewardWeights,
    mode: Mode,
) -> f64 {
    let mut r = weights.w_risk * (1.0 - risk) + weights.w_eff * (agent.v / agent.spec.v_max);
    if collided {
        r += weights.p_col;
    }
    if began_lane_change {
        r += weights.p_lcm;
    }
    if mode == Mode::Cooperative {
        r += weights.w_ev_speed * emv.speed_fraction;
        if emv.began_lane_change {
            r += weights.p_lcm_ev;
        }
    }
    r
}
