//! Risk-aware multi-agent traffic simulation around an emergency vehicle.
//!
//! The crate bundles a ring-road environment with a pairwise collision-risk
//! index, rule-based car-following baselines (Gipps and a discrete MPC cruise
//! controller), a small dense-network stack, a MAPPO trainer and the
//! experiment harness that drives them.

pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod mappo;
pub mod neural;
pub mod risk;

pub use env::{Action, AgentState, Env, EnvConfig, Mode, RewardWeights, Role, StepOutcome, TrackConfig, VehicleSpec};
pub use error::{Error, Result};
pub use risk::{PairKinematics, RiskAssessment, RiskParams};
