//! Safe longitudinal/lateral distances and the unified collision-risk index.
//!
//! Distances follow the responsibility-sensitive-safety construction: during
//! the response time `rho` the rear (or approaching) vehicle may still
//! accelerate, after which it brakes at a guaranteed rate until stopped, while
//! the other vehicle brakes as hard as the model permits. Each directional
//! risk index ramps linearly from 0 (the comfortable safe distance holds) to 1
//! (even the maximum-braking safe distance is violated). The unified index is
//! the product of the two with propensity exponents.

use serde::{Deserialize, Serialize};

use crate::env::{AgentState, TrackConfig};
use crate::error::{Error, Result};

/// Braking and response constants shared by the risk model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskParams {
    /// Response time (s).
    pub rho: f64,
    /// Maximum longitudinal acceleration during the response (m/s²).
    pub a_max: f64,
    /// Guaranteed longitudinal braking of the rear vehicle (m/s²).
    pub b_min: f64,
    /// Maximum braking assumed for the front vehicle (m/s²).
    pub b_max: f64,
    /// Maximum braking the rear vehicle is capable of (m/s²).
    pub brake_capability: f64,
    /// Maximum lateral acceleration during the response (m/s²).
    pub a_lat_max: f64,
    /// Guaranteed lateral braking (m/s²).
    pub b_lat_min: f64,
    /// Maximum lateral braking capability (m/s²).
    pub brake_lat_capability: f64,
    /// Longitudinal risk propensity exponent.
    pub beta: f64,
    /// Lateral risk propensity exponent.
    pub gamma: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            a_max: 2.5,
            b_min: 1.0,
            b_max: 2.5,
            brake_capability: 3.0,
            a_lat_max: 1.0,
            b_lat_min: 2.5,
            brake_lat_capability: 4.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("rho", self.rho),
            ("a_max", self.a_max),
            ("b_min", self.b_min),
            ("b_max", self.b_max),
            ("brake_capability", self.brake_capability),
            ("a_lat_max", self.a_lat_max),
            ("b_lat_min", self.b_lat_min),
            ("brake_lat_capability", self.brake_lat_capability),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ];
        for (name, value) in rates {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(format!("risk.{name} must be positive, got {value}")));
            }
        }
        if self.brake_capability < self.b_min {
            return Err(Error::config("risk.brake_capability must be >= risk.b_min"));
        }
        if self.brake_lat_capability < self.b_lat_min {
            return Err(Error::config(
                "risk.brake_lat_capability must be >= risk.b_lat_min",
            ));
        }
        Ok(())
    }
}

/// Relative kinematics of an ordered vehicle pair.
///
/// Longitudinal quantities refer to the rear/front ordering, lateral ones to
/// the left/right ordering. Lateral speeds share one frame in which positive
/// points from the left vehicle toward the right vehicle, so a left vehicle
/// with positive speed and a right vehicle with negative speed are closing.
/// Gaps are edge to edge and negative when the footprints overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairKinematics {
    pub v_rear: f64,
    pub v_front: f64,
    pub v_left: f64,
    pub v_right: f64,
    pub d_lon: f64,
    pub d_lat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskAssessment {
    pub d_lon_min: f64,
    pub d_lon_min_brake: f64,
    pub d_lat_min: f64,
    pub d_lat_min_brake: f64,
    pub r_lon: f64,
    pub r_lat: f64,
    pub r: f64,
    /// Edge-to-edge gaps the assessment was computed from.
    pub d_lon: f64,
    pub d_lat: f64,
}

/// Minimum safe longitudinal gap. With `use_max_brake` the rear vehicle's
/// braking capability replaces its guaranteed braking, giving the tighter bound.
pub fn lon_safe_distance(k: &PairKinematics, p: &RiskParams, use_max_brake: bool) -> f64 {
    let brake = if use_max_brake { p.brake_capability } else { p.b_min };
    let v_resp = k.v_rear + p.rho * p.a_max;
    let d = k.v_rear * p.rho + 0.5 * p.rho * p.rho * p.a_max + v_resp * v_resp / (2.0 * brake)
        - k.v_front * k.v_front / (2.0 * p.b_max);
    d.max(0.0)
}

/// Minimum safe lateral gap.
///
/// Both vehicles accelerate toward each other for `rho`, then brake laterally
/// until their lateral speed is zero. The braking displacement carries the
/// sign of the speed at the end of the response, which coincides with the
/// squared form whenever the two vehicles are closing after the response.
pub fn lat_safe_distance(k: &PairKinematics, p: &RiskParams, use_max_brake: bool) -> f64 {
    let brake = if use_max_brake {
        p.brake_lat_capability
    } else {
        p.b_lat_min
    };
    let v_left_resp = k.v_left + p.rho * p.a_lat_max;
    let v_right_resp = k.v_right - p.rho * p.a_lat_max;
    let left_travel =
        0.5 * (k.v_left + v_left_resp) * p.rho + v_left_resp * v_left_resp.abs() / (2.0 * brake);
    let right_travel = 0.5 * (k.v_right + v_right_resp) * p.rho
        + v_right_resp * v_right_resp.abs() / (2.0 * brake);
    (left_travel - right_travel).max(0.0)
}

/// Piecewise-linear index shared by both directions.
///
/// A safe bound of exactly zero means the worst case never closes the gap, so
/// any strictly positive gap is risk free. When the brake bound is zero or
/// equals the safe bound the ramp collapses to a step at the safe bound.
fn ramp(d: f64, d_min: f64, d_min_brake: f64) -> f64 {
    if d_min > 0.0 && d >= d_min {
        0.0
    } else if d_min == 0.0 && d > 0.0 {
        0.0
    } else if d_min_brake > 0.0 && d_min > d_min_brake && d >= d_min_brake {
        (1.0 - (d - d_min_brake) / (d_min - d_min_brake)).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

pub fn lon_risk(k: &PairKinematics, p: &RiskParams) -> f64 {
    ramp(
        k.d_lon,
        lon_safe_distance(k, p, false),
        lon_safe_distance(k, p, true),
    )
}

pub fn lat_risk(k: &PairKinematics, p: &RiskParams) -> f64 {
    ramp(
        k.d_lat,
        lat_safe_distance(k, p, false),
        lat_safe_distance(k, p, true),
    )
}

/// `r_lon^beta * r_lat^gamma`, with a zero factor always giving zero.
pub fn unified_risk(r_lon: f64, r_lat: f64, p: &RiskParams) -> f64 {
    if r_lon <= 0.0 || r_lat <= 0.0 {
        return 0.0;
    }
    (r_lon.min(1.0).powf(p.beta) * r_lat.min(1.0).powf(p.gamma)).clamp(0.0, 1.0)
}

/// Full assessment of one pair from its relative kinematics.
pub fn assess(k: &PairKinematics, p: &RiskParams) -> RiskAssessment {
    let d_lon_min = lon_safe_distance(k, p, false);
    let d_lon_min_brake = lon_safe_distance(k, p, true);
    let d_lat_min = lat_safe_distance(k, p, false);
    let d_lat_min_brake = lat_safe_distance(k, p, true);
    let overlapping = k.d_lon < 0.0 && k.d_lat < 0.0;
    let (r_lon, r_lat) = if overlapping {
        (1.0, 1.0)
    } else {
        (
            ramp(k.d_lon, d_lon_min, d_lon_min_brake),
            ramp(k.d_lat, d_lat_min, d_lat_min_brake),
        )
    };
    RiskAssessment {
        d_lon_min,
        d_lon_min_brake,
        d_lat_min,
        d_lat_min_brake,
        r_lon,
        r_lat,
        r: unified_risk(r_lon, r_lat, p),
        d_lon: k.d_lon,
        d_lat: k.d_lat,
    }
}

/// Relative kinematics of two simulated vehicles on the ring.
///
/// The front vehicle is the one ahead along the shorter forward arc. Lateral
/// positions interpolate between lanes while a lane change is in progress.
pub fn pair_kinematics(a: &AgentState, b: &AgentState, track: &TrackConfig) -> PairKinematics {
    let forward = track.forward_arc(a.s, b.s);
    let (rear, front, centre_gap) = if forward <= 0.5 * track.loop_length {
        (a, b, forward)
    } else {
        (b, a, track.loop_length - forward)
    };
    let d_lon = centre_gap - 0.5 * (rear.spec.length + front.spec.length);

    let ya = a.lateral_position(track);
    let yb = b.lateral_position(track);
    // Lateral coordinate grows to the left; the risk frame points rightward.
    let (left, right) = if ya >= yb { (a, b) } else { (b, a) };
    let d_lat = (ya - yb).abs() - 0.5 * (a.spec.width + b.spec.width);

    PairKinematics {
        v_rear: rear.v,
        v_front: front.v,
        v_left: -left.lateral_velocity(track),
        v_right: -right.lateral_velocity(track),
        d_lon,
        d_lat,
    }
}

/// Risk assessment for two simulated vehicles.
pub fn assess_pair(
    a: &AgentState,
    b: &AgentState,
    track: &TrackConfig,
    p: &RiskParams,
) -> RiskAssessment {
    assess(&pair_kinematics(a, b, track), p)
}
