use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::normalizer::ValueNormalizer;
use crate::baselines::DrivingPolicy;
use crate::env::{Action, Env, EnvConfig, Mode, Role};
use crate::error::{Error, Result};
use crate::neural::{checkpoint, AdamConfig, AdamState, Categorical, MlpParams};

/// Parameters with their optimiser state.
#[derive(Debug, Clone)]
pub struct Network {
    pub params: MlpParams,
    pub adam: AdamState,
}

impl Network {
    fn new(params: MlpParams, lr: f64) -> Self {
        let adam = AdamState::for_params(
            &params,
            AdamConfig {
                lr,
                ..AdamConfig::default()
            },
        );
        Self { params, adam }
    }
}

/// Actors and critics for every agent of a run.
///
/// Cooperative mode holds an EMV actor (index 0), one AV actor shared by all
/// AVs (index 1) and a single critic. Competitive mode holds one actor and one
/// critic per agent.
#[derive(Debug, Clone)]
pub struct PolicyBundle {
    mode: Mode,
    roles: Vec<Role>,
    actors: Vec<Network>,
    critics: Vec<Network>,
    normalizers: Vec<ValueNormalizer>,
    actor_of: Vec<usize>,
    critic_of: Vec<usize>,
}

fn routing(mode: Mode, roles: &[Role]) -> (Vec<usize>, Vec<usize>, usize, usize) {
    match mode {
        Mode::Cooperative => (
            roles.iter().map(|r| if *r == Role::Emv { 0 } else { 1 }).collect(),
            vec![0; roles.len()],
            2,
            1,
        ),
        Mode::Competitive => ((0..roles.len()).collect(), (0..roles.len()).collect(), roles.len(), roles.len()),
    }
}

impl PolicyBundle {
    pub fn new<R: Rng + ?Sized>(
        mode: Mode,
        roles: &[Role],
        obs_dim: usize,
        global_dim: usize,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let (actor_of, critic_of, n_actors, n_critics) = routing(mode, roles);
        let mut actors = Vec::with_capacity(n_actors);
        for _ in 0..n_actors {
            let p = MlpParams::actor(obs_dim, &cfg.hidden, Action::COUNT, rng)?;
            actors.push(Network::new(p, cfg.actor_lr));
        }
        let mut critics = Vec::with_capacity(n_critics);
        for _ in 0..n_critics {
            let p = MlpParams::critic(global_dim, &cfg.hidden, rng)?;
            critics.push(Network::new(p, cfg.critic_lr));
        }
        Ok(Self {
            mode,
            roles: roles.to_vec(),
            normalizers: vec![ValueNormalizer::default(); n_critics],
            actors,
            critics,
            actor_of,
            critic_of,
        })
    }

    /// Fresh bundle for the agents of `env_cfg`.
    pub fn for_env<R: Rng + ?Sized>(env_cfg: &EnvConfig, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        let roles: Vec<Role> = (0..env_cfg.agents)
            .map(|i| if i == crate::env::EMV_INDEX { Role::Emv } else { Role::Av })
            .collect();
        Self::new(cfg.mode, &roles, env_cfg.observation_dim(), env_cfg.global_dim(), cfg, rng)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn num_agents(&self) -> usize {
        self.roles.len()
    }

    pub fn observation_dim(&self) -> usize {
        self.actors[0].params.input_dim()
    }

    pub fn global_dim(&self) -> usize {
        self.critics[0].params.input_dim()
    }

    pub fn actor_of(&self, agent: usize) -> usize {
        self.actor_of[agent]
    }

    pub fn critic_of(&self, agent: usize) -> usize {
        self.critic_of[agent]
    }

    pub fn actors(&self) -> &[Network] {
        &self.actors
    }

    pub fn critics(&self) -> &[Network] {
        &self.critics
    }

    pub fn actors_mut(&mut self) -> &mut [Network] {
        &mut self.actors
    }

    pub fn critics_mut(&mut self) -> &mut [Network] {
        &mut self.critics
    }

    pub fn normalizers(&self) -> &[ValueNormalizer] {
        &self.normalizers
    }

    pub fn normalizers_mut(&mut self) -> &mut [ValueNormalizer] {
        &mut self.normalizers
    }

    /// Agents grouped by the actor that drives them.
    pub fn actor_groups(&self) -> Vec<Vec<usize>> {
        group(&self.actor_of, self.actors.len())
    }

    pub fn critic_groups(&self) -> Vec<Vec<usize>> {
        group(&self.critic_of, self.critics.len())
    }

    /// Per-agent action distributions for one row of observations per agent.
    pub fn distributions(&self, observations: ArrayView2<f64>) -> Result<Vec<Categorical>> {
        self.check_rows(observations.nrows())?;
        let mut out: Vec<Option<Categorical>> = vec![None; self.roles.len()];
        for (k, agents) in self.actor_groups().iter().enumerate() {
            if agents.is_empty() {
                continue;
            }
            let rows = observations.select(Axis(0), agents);
            let logits = self.actors[k].params.predict(rows.view())?;
            for (r, &j) in agents.iter().enumerate() {
                out[j] = Some(Categorical::from_logits(logits.row(r).as_slice().expect("row-major"))?);
            }
        }
        Ok(out.into_iter().map(|d| d.expect("every agent has an actor")).collect())
    }

    /// Critic values in return units, one per agent row.
    pub fn values(&self, globals: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_rows(globals.nrows())?;
        let mut out = vec![0.0; self.roles.len()];
        for (k, agents) in self.critic_groups().iter().enumerate() {
            if agents.is_empty() {
                continue;
            }
            let rows = globals.select(Axis(0), agents);
            let v = self.critics[k].params.predict(rows.view())?;
            for (r, &j) in agents.iter().enumerate() {
                out[j] = self.normalizers[k].denormalize(v[[r, 0]]);
            }
        }
        Ok(out)
    }

    /// Most probable action per agent.
    pub fn greedy_actions(&self, observations: ArrayView2<f64>) -> Result<Vec<Action>> {
        Ok(self
            .distributions(observations)?
            .iter()
            .map(|d| Action::from_index(d.mode()).expect("actor width matches action count"))
            .collect())
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.roles.len() {
            return Err(Error::Dimension {
                expected: self.roles.len(),
                got: rows,
            });
        }
        Ok(())
    }

    /// Checks that the bundle can drive `env`.
    pub fn check_env(&self, env: &Env) -> Result<()> {
        self.check_rows(env.num_agents())?;
        let dim = env.config().observation_dim();
        if dim != self.observation_dim() {
            return Err(Error::Dimension {
                expected: self.observation_dim(),
                got: dim,
            });
        }
        Ok(())
    }

    /// Writes one file per network plus `manifest.json`.
    pub fn save(&self, dir: &Path, env_cfg: &EnvConfig, iteration: usize) -> Result<BundleManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut actors = Vec::new();
        for (k, agents) in self.actor_groups().into_iter().enumerate() {
            let file = format!("actor_{k:03}.bin");
            checkpoint::save(&self.actors[k].params, &dir.join(&file))?;
            actors.push(NetworkEntry { file, agents });
        }
        let mut critics = Vec::new();
        for (k, agents) in self.critic_groups().into_iter().enumerate() {
            let file = format!("critic_{k:03}.bin");
            checkpoint::save(&self.critics[k].params, &dir.join(&file))?;
            critics.push(NetworkEntry { file, agents });
        }
        let manifest = BundleManifest {
            mode: self.mode,
            roles: self.roles.clone(),
            env_config_sha256: config_hash(env_cfg)?,
            iteration,
            actors,
            critics,
            normalizers: self.normalizers.clone(),
        };
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Restores a bundle saved by [`PolicyBundle::save`]. Optimiser state
    /// starts fresh.
    pub fn load(dir: &Path, cfg: &TrainConfig) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: BundleManifest = serde_json::from_str(&text)?;
        let (actor_of, critic_of, n_actors, n_critics) = routing(m.mode, &m.roles);
        if m.actors.len() != n_actors || m.critics.len() != n_critics || m.normalizers.len() != n_critics {
            return Err(Error::Checkpoint("manifest network count does not match its mode".into()));
        }
        let actors = m
            .actors
            .iter()
            .map(|e| Ok(Network::new(checkpoint::load(&dir.join(&e.file))?, cfg.actor_lr)))
            .collect::<Result<Vec<_>>>()?;
        let critics = m
            .critics
            .iter()
            .map(|e| Ok(Network::new(checkpoint::load(&dir.join(&e.file))?, cfg.critic_lr)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: m.mode,
            roles: m.roles,
            actors,
            critics,
            normalizers: m.normalizers,
            actor_of,
            critic_of,
        })
    }
}

fn group(owner: &[usize], count: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); count];
    for (agent, &k) in owner.iter().enumerate() {
        groups[k].push(agent);
    }
    groups
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub file: String,
    pub agents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub mode: Mode,
    pub roles: Vec<Role>,
    pub env_config_sha256: String,
    pub iteration: usize,
    pub actors: Vec<NetworkEntry>,
    pub critics: Vec<NetworkEntry>,
    pub normalizers: Vec<ValueNormalizer>,
}

/// SHA-256 of the config's JSON form, hex encoded.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    let json = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
}

impl DrivingPolicy for PolicyBundle {
    fn act(&self, env: &Env, agent: usize) -> Action {
        let obs = Array2::from_shape_vec((1, env.config().observation_dim()), env.observe(agent))
            .expect("observation length");
        let k = self.actor_of[agent];
        let logits = self.actors[k].params.predict(obs.view()).expect("bundle checked against env");
        let dist = Categorical::from_logits(logits.row(0).as_slice().expect("row-major"))
            .expect("finite logits");
        Action::from_index(dist.mode()).expect("actor width matches action count")
    }

    fn act_all(&self, env: &Env) -> Vec<Action> {
        self.greedy_actions(env.observations().view())
            .expect("bundle checked against env")
    }
}
