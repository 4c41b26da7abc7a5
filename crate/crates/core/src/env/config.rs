use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::RiskParams;

/// Ring-road geometry and integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    pub loop_length: f64,
    pub lanes: usize,
    pub lane_width: f64,
    pub dt: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            loop_length: 400.0,
            lanes: 2,
            lane_width: 3.5,
            dt: 0.1,
        }
    }
}

impl TrackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loop_length.is_finite() && self.loop_length > 0.0) {
            return Err(Error::config("track.loop_length must be positive"));
        }
        if self.lanes < 2 {
            return Err(Error::config("track.lanes must be at least 2"));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::config("track.lane_width must be positive"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("track.dt must be positive"));
        }
        Ok(())
    }

    /// Position wrapped into `[0, loop_length)`.
    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.loop_length);
        // rem_euclid can round up to the modulus for tiny negative inputs.
        if w >= self.loop_length {
            0.0
        } else {
            w
        }
    }

    /// Forward arc from `from` to `to`, in `[0, loop_length)`.
    pub fn forward_arc(&self, from: f64, to: f64) -> f64 {
        self.wrap(to - from)
    }

    /// Shortest signed arc from `from` to `to`; positive when `to` is ahead.
    pub fn signed_arc(&self, from: f64, to: f64) -> f64 {
        let f = self.forward_arc(from, to);
        if f > 0.5 * self.loop_length {
            f - self.loop_length
        } else {
            f
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Av,
    Emv,
}

/// Physical envelope of one vehicle class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub role: Role,
    pub v_min: f64,
    pub v_max: f64,
    pub length: f64,
    pub width: f64,
    pub perception_radius: f64,
}

impl VehicleSpec {
    pub fn av() -> Self {
        Self {
            role: Role::Av,
            v_min: 7.0,
            v_max: 20.0,
            length: 4.0,
            width: 2.0,
            perception_radius: 20.0,
        }
    }

    pub fn emv() -> Self {
        Self {
            role: Role::Emv,
            v_min: 7.0,
            v_max: 30.0,
            length: 6.0,
            width: 2.5,
            perception_radius: 20.0,
        }
    }

    fn validate(&self, track: &TrackConfig) -> Result<()> {
        let name = match self.role {
            Role::Av => "av",
            Role::Emv => "emv",
        };
        if !(self.v_min >= 0.0 && self.v_min <= self.v_max && self.v_max.is_finite()) {
            return Err(Error::config(format!("{name}: need 0 <= v_min <= v_max")));
        }
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err(Error::config(format!("{name}: dimensions must be positive")));
        }
        if self.width >= track.lane_width {
            return Err(Error::config(format!("{name}: width must be below lane width")));
        }
        if !(self.perception_radius > 0.0) {
            return Err(Error::config(format!("{name}: perception_radius must be positive")));
        }
        Ok(())
    }
}

/// Coefficients of the per-agent reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    /// Weight on `1 - r`, the complement of the agent's risk index.
    pub w_risk: f64,
    /// Weight on the agent's normalised speed.
    pub w_eff: f64,
    pub p_col: f64,
    pub p_lcm: f64,
    pub p_lcm_ev: f64,
    /// Weight on the emergency vehicle's normalised speed.
    pub w_ev_speed: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_risk: 1.0,
            w_eff: 1.0,
            p_col: -100.0,
            p_lcm: -0.1,
            p_lcm_ev: -0.2,
            w_ev_speed: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_col < 0.0) {
            return Err(Error::config("reward.p_col must be negative"));
        }
        if self.p_lcm > 0.0 || self.p_lcm_ev > 0.0 {
            return Err(Error::config("lane-change penalties must be <= 0"));
        }
        let all = [self.w_risk, self.w_eff, self.p_col, self.p_lcm, self.p_lcm_ev, self.w_ev_speed];
        if all.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("reward weights"));
        }
        Ok(())
    }
}

/// Whether agents share the emergency-vehicle terms of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Cooperative,
    Competitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub track: TrackConfig,
    /// Total vehicles including the single emergency vehicle.
    pub agents: usize,
    pub av: VehicleSpec,
    pub emv: VehicleSpec,
    /// Steps per episode.
    pub horizon: usize,
    /// Neighbour slots in each observation.
    pub neighbours: usize,
    pub lane_change_steps: u32,
    /// Minimum bumper gap between same-lane vehicles at spawn (m).
    pub spawn_gap: f64,
    /// Bumper gap the rear vehicle is re-projected to after a collision (m).
    pub post_collision_gap: f64,
    pub reward: RewardWeights,
    pub risk: RiskParams,
    pub mode: Mode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            track: TrackConfig::default(),
            agents: 10,
            av: VehicleSpec::av(),
            emv: VehicleSpec::emv(),
            horizon: 400,
            neighbours: 6,
            lane_change_steps: 10,
            spawn_gap: 6.0,
            post_collision_gap: 2.0,
            reward: RewardWeights::default(),
            risk: RiskParams::default(),
            mode: Mode::Cooperative,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.track.validate()?;
        self.av.validate(&self.track)?;
        self.emv.validate(&self.track)?;
        self.reward.validate()?;
        self.risk.validate()?;
        if self.av.role != Role::Av || self.emv.role != Role::Emv {
            return Err(Error::config("vehicle spec roles are swapped"));
        }
        if !(self.emv.v_max > self.av.v_max) {
            return Err(Error::config("emv.v_max must exceed av.v_max"));
        }
        if self.agents == 0 {
            return Err(Error::config("at least one agent (the EMV) is required"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        if self.lane_change_steps == 0 {
            return Err(Error::config("lane_change_steps must be positive"));
        }
        if !(self.spawn_gap >= 0.0 && self.post_collision_gap >= 0.0) {
            return Err(Error::config("spawn and post-collision gaps must be >= 0"));
        }
        Ok(())
    }

    /// Length of one spawn slot: the longest vehicle plus the spawn gap.
    pub fn slot_length(&self) -> f64 {
        self.av.length.max(self.emv.length) + self.spawn_gap
    }

    pub fn slots_per_lane(&self) -> usize {
        (self.track.loop_length / self.slot_length()).floor() as usize
    }

    /// Number of vehicles the track holds at the minimum spawn gap.
    pub fn capacity(&self) -> usize {
        self.track.lanes * self.slots_per_lane()
    }

    pub fn check_capacity(&self) -> Result<()> {
        let capacity = self.capacity();
        if self.agents > capacity {
            return Err(Error::Capacity {
                agents: self.agents,
                capacity,
                lanes: self.track.lanes,
                slots_per_lane: self.slots_per_lane(),
                slot_length: self.slot_length(),
            });
        }
        Ok(())
    }

    pub fn spec_for(&self, role: Role) -> &VehicleSpec {
        match role {
            Role::Av => &self.av,
            Role::Emv => &self.emv,
        }
    }

    /// Scale for speed differences in observations.
    pub(crate) fn speed_scale(&self) -> f64 {
        self.av.v_max.max(self.emv.v_max)
    }

    pub fn observation_dim(&self) -> usize {
        1 + self.track.lanes + 2 + NEIGHBOUR_FEATURES * self.neighbours
    }

    pub fn global_dim(&self) -> usize {
        self.observation_dim() + GLOBAL_EXTRA_FEATURES
    }
}

pub(crate) const NEIGHBOUR_FEATURES: usize = 5;
pub(crate) const GLOBAL_EXTRA_FEATURES: usize = 5;
