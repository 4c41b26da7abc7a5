use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, RewardPoint, Scenario};
use super::evaluate::{eval_seeds, evaluate_policy, RunTag};
use super::metrics::EpisodeMetrics;
use crate::baselines::{DrivingPolicy, GippsPolicy, MpcPolicy};
use crate::env::{Env, EnvConfig, Mode};
use crate::error::{Error, Result};
use crate::mappo::{resolved_env_config, train_with, CurvePoint, PolicyBundle, TrainConfig};

/// Training record of one (label, agents, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub agents: usize,
    pub seed: u64,
    pub mode: Mode,
    pub steps_per_sec: f64,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub curve: Vec<CurvePoint>,
}

/// A sub-run that could not be executed, e.g. an infeasible agent count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub label: String,
    pub agents: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub study: String,
    pub config: ExperimentConfig,
    pub episodes: Vec<EpisodeMetrics>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<Failure>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl StudyResult {
    fn new(study: &str, config: &ExperimentConfig) -> Self {
        Self {
            study: study.to_string(),
            config: config.clone(),
            episodes: Vec::new(),
            runs: Vec::new(),
            failures: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    fn finish(mut self) -> Self {
        self.finished_unix = unix_now();
        self
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn dir_name(label: &str) -> &str {
    if label.is_empty() {
        "mappo"
    } else {
        label
    }
}

/// Trains one MAPPO run. With `out`, the learning curve is appended to
/// `out/curves/<label>/seed_<s>.csv` as it grows and checkpoints land in
/// `out/checkpoints/<label>/seed_<s>`.
pub fn train_run(
    cfg: &ExperimentConfig,
    env_cfg: &EnvConfig,
    train_cfg: &TrainConfig,
    label: &str,
    out: Option<&Path>,
) -> Result<(PolicyBundle, RunRecord)> {
    let seed = train_cfg.seed;
    let ckpt_dir = out.map(|o| o.join("checkpoints").join(dir_name(label)).join(format!("seed_{seed}")));
    let mut curve_file = match out {
        Some(o) => {
            let dir = o.join("curves").join(dir_name(label));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = dir.join(format!("seed_{seed}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(CURVE_HEADER)?;
            w.flush().map_err(|e| Error::io(&path, e))?;
            Some((w, path))
        }
        None => None,
    };
    let every = cfg.experiment.checkpoint_every;
    let outcome = train_with(env_cfg, train_cfg, |p| {
        if let Some((w, path)) = curve_file.as_mut() {
            w.write_record(curve_row(p.point))?;
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        if let Some(dir) = &ckpt_dir {
            if every > 0 && (p.iteration + 1) % every == 0 {
                p.bundle
                    .save(&dir.join(format!("iter_{:06}", p.iteration + 1)), p.env_config, p.iteration + 1)?;
            }
        }
        Ok(())
    })?;
    if let Some(dir) = &ckpt_dir {
        outcome.bundle.save(dir, &outcome.env_config, outcome.curve.len())?;
    }
    let record = RunRecord {
        label: label.to_string(),
        agents: env_cfg.agents,
        seed,
        mode: train_cfg.mode,
        steps_per_sec: outcome.steps_per_sec(),
        wall_seconds: outcome.wall_seconds,
        curve: outcome.curve.clone(),
    };
    Ok((outcome.bundle, record))
}

pub const CURVE_HEADER: [&str; 6] = ["iteration", "summed_reward", "collisions", "mean_risk", "emv_speed", "av_speed"];

pub(crate) fn curve_row(p: &CurvePoint) -> [String; 6] {
    [
        p.iteration.to_string(),
        p.summed_reward.to_string(),
        p.collisions.to_string(),
        p.mean_risk.to_string(),
        p.emv_speed.to_string(),
        p.av_speed.to_string(),
    ]
}

/// A MAPPO bundle for `seed`: loaded when a checkpoint directory is
/// configured, trained otherwise.
fn mappo_policy(
    cfg: &ExperimentConfig,
    env_cfg: &EnvConfig,
    train_cfg: &TrainConfig,
    label: &str,
    out: Option<&Path>,
    result: &mut StudyResult,
) -> Result<PolicyBundle> {
    if let Some(root) = &cfg.experiment.checkpoint {
        let bundle = PolicyBundle::load(&root.join(format!("seed_{}", train_cfg.seed)), train_cfg)?;
        let env = Env::new(resolved_env_config(env_cfg, train_cfg), 0)?;
        bundle.check_env(&env)?;
        return Ok(bundle);
    }
    let (bundle, record) = train_run(cfg, env_cfg, train_cfg, label, out)?;
    result.runs.push(record);
    Ok(bundle)
}

fn baseline(cfg: &ExperimentConfig, method: Method) -> Box<dyn DrivingPolicy> {
    match method {
        Method::Gipps => Box::new(GippsPolicy::new(cfg.gipps)),
        Method::Mpc => Box::new(MpcPolicy::new(cfg.mpc, cfg.gipps)),
        Method::Mappo => unreachable!("MAPPO is not a fixed rule"),
    }
}

fn tag(study: &str, scenario: Scenario, method: Method, label: &str, seed: u64) -> RunTag {
    RunTag {
        study: study.to_string(),
        scenario,
        method,
        label: label.to_string(),
        seed,
    }
}

/// Trains MAPPO for every seed without evaluating.
pub fn run_train(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let mut result = StudyResult::new("train", cfg);
    let env_cfg = cfg.env_config(cfg.experiment.agents);
    for &seed in &cfg.experiment.seeds {
        let (_, record) = train_run(cfg, &env_cfg, &cfg.train_config(seed), "", out)?;
        result.runs.push(record);
    }
    Ok(result.finish())
}

/// Evaluates the configured method for every seed.
pub fn run_eval(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let mut result = StudyResult::new("eval", cfg);
    let x = &cfg.experiment;
    let env_cfg = cfg.env_config(x.agents);
    for &seed in &x.seeds {
        let seeds = eval_seeds(seed, x.eval_episodes);
        let t = tag("eval", x.scenario, x.method, "", seed);
        let rows = match x.method {
            Method::Mappo => {
                let train_cfg = cfg.train_config(seed);
                let bundle = mappo_policy(cfg, &env_cfg, &train_cfg, "", out, &mut result)?;
                evaluate_policy(&bundle, &resolved_env_config(&env_cfg, &train_cfg), &seeds, &t)?
            }
            m => evaluate_policy(baseline(cfg, m).as_ref(), &env_cfg, &seeds, &t)?,
        };
        result.episodes.extend(rows);
    }
    Ok(result.finish())
}

/// MAPPO against Gipps and MPC on identical evaluation episodes.
pub fn run_comparison(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let mut result = StudyResult::new("compare", cfg);
    let x = &cfg.experiment;
    let env_cfg = cfg.env_config(x.agents);
    for &seed in &x.seeds {
        let train_cfg = cfg.train_config(seed);
        let bundle = mappo_policy(cfg, &env_cfg, &train_cfg, "", out, &mut result)?;
        let seeds = eval_seeds(seed, x.eval_episodes);
        let eval_cfg = resolved_env_config(&env_cfg, &train_cfg);
        let rows = evaluate_policy(&bundle, &eval_cfg, &seeds, &tag("compare", x.scenario, Method::Mappo, "", seed))?;
        result.episodes.extend(rows);
        for m in [Method::Gipps, Method::Mpc] {
            let rows = evaluate_policy(baseline(cfg, m).as_ref(), &eval_cfg, &seeds, &tag("compare", x.scenario, m, "", seed))?;
            result.episodes.extend(rows);
        }
    }
    Ok(result.finish())
}

/// Trains and evaluates MAPPO at each `(w_risk, w_eff)` point, in grid order.
pub fn run_reward_sweep(cfg: &ExperimentConfig, grid: &[RewardPoint], out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let mut result = StudyResult::new("sweep-reward", cfg);
    let x = &cfg.experiment;
    for point in grid {
        let mut point_cfg = cfg.clone();
        point_cfg.reward.w_risk = point.w_risk;
        point_cfg.reward.w_eff = point.w_eff;
        point_cfg.reward.validate()?;
        let env_cfg = point_cfg.env_config(x.agents);
        let label = point.label();
        for &seed in &x.seeds {
            let train_cfg = point_cfg.train_config(seed);
            let (bundle, record) = train_run(&point_cfg, &env_cfg, &train_cfg, &label, out)?;
            result.runs.push(record);
            let rows = evaluate_policy(
                &bundle,
                &resolved_env_config(&env_cfg, &train_cfg),
                &eval_seeds(seed, x.eval_episodes),
                &tag("sweep-reward", x.scenario, Method::Mappo, &label, seed),
            )?;
            result.episodes.extend(rows);
        }
    }
    Ok(result.finish())
}

/// Trains and evaluates MAPPO per agent count. Counts the track cannot hold
/// are reported as failures and skipped.
pub fn run_scalability(cfg: &ExperimentConfig, counts: &[usize], out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let mut result = StudyResult::new("scale", cfg);
    let x = &cfg.experiment;
    for &count in counts {
        let env_cfg = cfg.env_config(count);
        let label = format!("agents_{count}");
        if let Err(e) = env_cfg.validate().and_then(|_| env_cfg.check_capacity()) {
            result.failures.push(Failure {
                label,
                agents: count,
                error: e.to_string(),
            });
            continue;
        }
        for &seed in &x.seeds {
            let train_cfg = cfg.train_config(seed);
            let (bundle, record) = train_run(cfg, &env_cfg, &train_cfg, &label, out)?;
            result.runs.push(record);
            let rows = evaluate_policy(
                &bundle,
                &resolved_env_config(&env_cfg, &train_cfg),
                &eval_seeds(seed, x.eval_episodes),
                &tag("scale", x.scenario, Method::Mappo, &label, seed),
            )?;
            result.episodes.extend(rows);
        }
    }
    Ok(result.finish())
}

/// Cooperative against competitive training on matched seeds.
pub fn run_competitive(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<StudyResult> {
    cfg.validate()?;
    let x = &cfg.experiment;
    if x.scenario != Scenario::Road {
        return Err(Error::config("the competitive study runs on the road scenario"));
    }
    let mut result = StudyResult::new("competitive", cfg);
    let env_cfg = cfg.env_config(x.agents);
    for (mode, label) in [(Mode::Cooperative, "cooperative"), (Mode::Competitive, "competitive")] {
        for &seed in &x.seeds {
            let train_cfg = TrainConfig {
                mode,
                ..cfg.train_config(seed)
            };
            let (bundle, record) = train_run(cfg, &env_cfg, &train_cfg, label, out)?;
            result.runs.push(record);
            let rows = evaluate_policy(
                &bundle,
                &resolved_env_config(&env_cfg, &train_cfg),
                &eval_seeds(seed, x.eval_episodes),
                &tag("competitive", x.scenario, Method::Mappo, label, seed),
            )?;
            result.episodes.extend(rows);
        }
    }
    Ok(result.finish())
}

/// Path helper for callers that want the directory a run's checkpoint uses.
pub fn checkpoint_dir(out: &Path, label: &str, seed: u64) -> PathBuf {
    out.join("checkpoints").join(dir_name(label)).join(format!("seed_{seed}"))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
