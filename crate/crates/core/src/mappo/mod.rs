//! Multi-agent PPO with a centralised critic.

mod buffer;
mod bundle;
mod config;
mod loss;
mod normalizer;
mod train;

pub use buffer::{normalize, RolloutBuffer, TransitionRecord};
pub use bundle::{config_hash, BundleManifest, Network, NetworkEntry, PolicyBundle, MANIFEST};
pub use config::TrainConfig;
pub use loss::{actor_objective, clipped_value_term, critic_loss, ActorBatch, ActorStats, CriticBatch};
pub use normalizer::ValueNormalizer;
pub use train::{
    clip_grad_norm, collect_rollout, ppo_update, resolved_env_config, train, train_with, CurvePoint,
    EpisodeSummary, TrainOutcome, TrainProgress, UpdateStats,
};
