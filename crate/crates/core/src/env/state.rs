use serde::{Deserialize, Serialize};

use super::config::{Role, TrackConfig, VehicleSpec};

/// An in-progress lane change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneChange {
    pub target: usize,
    pub remaining: u32,
    pub total: u32,
}

impl LaneChange {
    /// Fraction of the manoeuvre completed, in `[0, 1)`.
    pub fn progress(&self) -> f64 {
        f64::from(self.total - self.remaining) / f64::from(self.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub spec: VehicleSpec,
    /// Arc-length position of the vehicle centre, in `[0, loop_length)`.
    pub s: f64,
    pub lane: usize,
    pub v: f64,
    pub lane_change: Option<LaneChange>,
    pub collided_this_step: bool,
}

impl AgentState {
    pub fn role(&self) -> Role {
        self.spec.role
    }

    pub fn is_emv(&self) -> bool {
        self.spec.role == Role::Emv
    }

    /// Fractional lane index, interpolated while changing lanes.
    pub fn lane_position(&self) -> f64 {
        match self.lane_change {
            Some(lc) => {
                let dir = lc.target as f64 - self.lane as f64;
                self.lane as f64 + dir * lc.progress()
            }
            None => self.lane as f64,
        }
    }

    /// Lateral coordinate of the vehicle centre; grows toward the left.
    pub fn lateral_position(&self, track: &TrackConfig) -> f64 {
        (self.lane_position() + 0.5) * track.lane_width
    }

    /// Lateral speed (m/s), positive toward the left.
    pub fn lateral_velocity(&self, track: &TrackConfig) -> f64 {
        match self.lane_change {
            Some(lc) => {
                let dir = lc.target as f64 - self.lane as f64;
                dir * track.lane_width / (f64::from(lc.total) * track.dt)
            }
            None => 0.0,
        }
    }

    /// Lateral interval occupied for collision purposes. A lane-changing
    /// vehicle blocks both its source and target lanes.
    pub fn lateral_extent(&self, track: &TrackConfig) -> (f64, f64) {
        let (lo_lane, hi_lane) = match self.lane_change {
            Some(lc) => (self.lane.min(lc.target), self.lane.max(lc.target)),
            None => (self.lane, self.lane),
        };
        let half = 0.5 * self.spec.width;
        (
            (lo_lane as f64 + 0.5) * track.lane_width - half,
            (hi_lane as f64 + 0.5) * track.lane_width + half,
        )
    }

    /// True when the vehicle occupies `lane`, counting a lane change target.
    pub fn occupies_lane(&self, lane: usize) -> bool {
        self.lane == lane || self.lane_change.is_some_and(|lc| lc.target == lane)
    }
}
