use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// High-level driving command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Accelerate,
    Brake,
    HeavyAccelerate,
    HeavyBrake,
    ChangeLeft,
    ChangeRight,
    Keep,
}

impl Action {
    pub const COUNT: usize = 7;

    pub const ALL: [Action; Action::COUNT] = [
        Action::Accelerate,
        Action::Brake,
        Action::HeavyAccelerate,
        Action::HeavyBrake,
        Action::ChangeLeft,
        Action::ChangeRight,
        Action::Keep,
    ];

    /// Commands that only act on speed, in index order.
    pub const LONGITUDINAL: [Action; 5] = [
        Action::Accelerate,
        Action::Brake,
        Action::HeavyAccelerate,
        Action::HeavyBrake,
        Action::Keep,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Longitudinal acceleration (m/s²). Lane changes hold speed.
    pub fn acceleration(self) -> f64 {
        match self {
            Action::Accelerate => 1.0,
            Action::Brake => -1.0,
            Action::HeavyAccelerate => 2.5,
            Action::HeavyBrake => -3.0,
            Action::ChangeLeft | Action::ChangeRight | Action::Keep => 0.0,
        }
    }

    /// Lane offset requested by the command; left is toward higher lane indices.
    pub fn lane_offset(self) -> i32 {
        match self {
            Action::ChangeLeft => 1,
            Action::ChangeRight => -1,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Accelerate => "accelerate",
            Action::Brake => "brake",
            Action::HeavyAccelerate => "heavy_accelerate",
            Action::HeavyBrake => "heavy_brake",
            Action::ChangeLeft => "change_left",
            Action::ChangeRight => "change_right",
            Action::Keep => "keep",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}
