use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use emvsim_core::harness::{
    aggregate, export_results, run_comparison, run_competitive, run_eval, run_reward_sweep, run_scalability,
    run_train, ExperimentConfig, Method, Scenario, StudyResult,
};

/// Emergency-vehicle traffic experiments: MAPPO training and rule-based baselines.
#[derive(Debug, Parser)]
#[command(name = "emvsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train MAPPO for each seed and save checkpoints and learning curves.
    Train(Common),
    /// Evaluate one method (`--method`) on seeded episodes.
    Eval(Common),
    /// MAPPO against Gipps and MPC on identical episodes.
    Compare(Common),
    /// Train and evaluate MAPPO over the reward-weight grid.
    SweepReward(Common),
    /// Train and evaluate MAPPO for several agent counts.
    Scale {
        #[command(flatten)]
        common: Common,
        /// Comma-separated agent counts; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Cooperative against competitive training on matched seeds.
    Competitive(Common),
    /// Print the default configuration file.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML). Missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    agents: Option<usize>,
    /// Training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    method: Option<Method>,
    /// Load MAPPO checkpoints from this directory instead of training.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        let x = &mut cfg.experiment;
        if let Some(s) = self.seed {
            x.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            x.out_dir = o.clone();
        }
        if let Some(s) = self.scenario {
            x.scenario = s;
        }
        if let Some(a) = self.agents {
            x.agents = a;
        }
        if let Some(e) = self.eval_episodes {
            x.eval_episodes = e;
        }
        if let Some(m) = self.method {
            x.method = m;
        }
        if let Some(c) = &self.checkpoint {
            x.checkpoint = Some(c.clone());
        }
        if let Some(e) = self.episodes {
            cfg.train.episodes = e;
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn finish(result: &StudyResult, cfg: &ExperimentConfig) -> Result<()> {
    let out = &cfg.experiment.out_dir;
    let files = export_results(result, out).with_context(|| format!("writing results to {}", out.display()))?;
    for row in aggregate(&result.episodes) {
        println!(
            "{:<12} {:<8} {:<6} {:<22} n={:<3} reward {:>10.2} ± {:<8.2} emv {:>6.2} ± {:<5.2} av {:>6.2} ± {:<5.2} collisions {:>5.2} risk {:.3}",
            row.study,
            row.scenario,
            row.method,
            row.label,
            row.agents,
            row.reward_mean,
            row.reward_std,
            row.emv_speed_mean,
            row.emv_speed_std,
            row.av_speed_mean,
            row.av_speed_std,
            row.collisions_mean,
            row.mean_risk_mean,
        );
    }
    for run in &result.runs {
        println!(
            "trained {} agents={} seed={} in {:.1}s ({:.1} steps/s)",
            if run.label.is_empty() { "mappo" } else { &run.label },
            run.agents,
            run.seed,
            run.wall_seconds,
            run.steps_per_sec
        );
    }
    for f in &result.failures {
        eprintln!("skipped {} ({} agents): {}", f.label, f.agents, f.error);
    }
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (cfg, result) = match &cli.command {
        Command::DefaultConfig => {
            print!("{}", ExperimentConfig::default().to_toml()?);
            return Ok(());
        }
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let r = run_train(&cfg, Some(&cfg.experiment.out_dir))?;
            (cfg, r)
        }
        Command::Eval(c) => {
            let cfg = c.resolve()?;
            let r = run_eval(&cfg, Some(&cfg.experiment.out_dir))?;
            (cfg, r)
        }
        Command::Compare(c) => {
            let cfg = c.resolve()?;
            let r = run_comparison(&cfg, Some(&cfg.experiment.out_dir))?;
            (cfg, r)
        }
        Command::SweepReward(c) => {
            let cfg = c.resolve()?;
            let r = run_reward_sweep(&cfg, &cfg.experiment.reward_grid, Some(&cfg.experiment.out_dir))?;
            (cfg, r)
        }
        Command::Scale { common, counts } => {
            let cfg = common.resolve()?;
            let counts = counts.clone().unwrap_or_else(|| cfg.experiment.agent_counts.clone());
            let r = run_scalability(&cfg, &counts, Some(&cfg.experiment.out_dir))?;
            (cfg, r)
        }
        Command::Competitive(c) => {
            let cfg = c.resolve()?;
            let r = run_competitive(&cfg, Some(&cfg.experiment.out_dir))?;
            (cfg, r)
        }
    };
    finish(&result, &cfg)
}
