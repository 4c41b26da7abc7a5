//! Experiment driver: configuration, evaluation, studies and result export.

mod config;
mod evaluate;
mod export;
mod metrics;
mod run;

pub use config::{
    default_reward_grid, EnvSection, ExperimentConfig, ExperimentSection, Method, RewardPoint, Scenario,
};
pub use evaluate::{eval_seeds, evaluate_episode, evaluate_policy, RunTag};
pub use export::{
    export_results, read_episodes, CONFIG_SNAPSHOT, EPISODES_CSV, EPISODE_HEADER, RUN_MANIFEST, SUMMARY_CSV,
    SUMMARY_HEADER,
};
pub use metrics::{aggregate, AggregateRow, EpisodeMetrics, Stat};
pub use run::{
    checkpoint_dir, run_comparison, run_competitive, run_eval, run_reward_sweep, run_scalability, run_train,
    train_run, Failure, RunRecord, StudyResult, CURVE_HEADER,
};
