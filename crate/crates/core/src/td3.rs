//! Twin-delayed deep deterministic policy gradient.
//!
//! Jump episodes consist of a single action, so every stored transition is
//! terminal and the critic target reduces to the reward. The bootstrapped
//! target (target-policy smoothing plus the twin minimum) is still available
//! for non-terminal transitions.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::nn::{read_u32, read_u64, Adam, Mlp, NnError, OutputActivation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub batch_size: usize,
    /// Standard deviation of the Gaussian exploration noise.
    pub expl_noise: f64,
    /// Target-policy smoothing noise and its clip.
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: usize,
    /// Polyak coefficient of the target networks.
    pub tau: f64,
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            batch_size: 256,
            expl_noise: 0.4,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            tau: 0.005,
            gamma: 0.99,
            buffer_capacity: 1_000_000,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, reason: &str| {
            Err(ConfigError::Invalid {
                field: format!("train.td3.{field}"),
                reason: reason.into(),
            })
        };
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if self.policy_delay == 0 {
            return bad("policy_delay", "must be >= 1");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity", "must be >= batch_size");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must be in [0, 1]");
        }
        for (f, v) in [
            ("expl_noise", self.expl_noise),
            ("policy_noise", self.policy_noise),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(f, "must be >= 0");
            }
        }
        for (f, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(f, "must be > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

impl Transition {
    /// A one-step jump episode: terminal, next state irrelevant.
    pub fn terminal(state: Vec<f64>, action: Vec<f64>, reward: f64) -> Self {
        let next_state = vec![0.0; state.len()];
        Self {
            state,
            action,
            reward,
            next_state,
            done: true,
        }
    }
}

/// Ring buffer of transitions stored in flat row-major arrays.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    inserted: usize,
}

/// A sampled batch, one transition per row.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            inserted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of transitions ever pushed.
    pub fn inserted(&self) -> usize {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        assert_eq!(t.state.len(), self.state_dim);
        assert_eq!(t.action.len(), self.action_dim);
        assert_eq!(t.next_state.len(), self.state_dim);
        if self.len() < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.next_states.extend_from_slice(&t.next_state);
            self.rewards.push(t.reward);
            self.dones.push(t.done);
        } else {
            let i = self.inserted % self.capacity;
            let (sd, ad) = (self.state_dim, self.action_dim);
            self.states[i * sd..(i + 1) * sd].copy_from_slice(&t.state);
            self.actions[i * ad..(i + 1) * ad].copy_from_slice(&t.action);
            self.next_states[i * sd..(i + 1) * sd].copy_from_slice(&t.next_state);
            self.rewards[i] = t.reward;
            self.dones[i] = t.done;
        }
        self.inserted += 1;
    }

    pub fn get(&self, i: usize) -> Transition {
        let (sd, ad) = (self.state_dim, self.action_dim);
        Transition {
            state: self.states[i * sd..(i + 1) * sd].to_vec(),
            action: self.actions[i * ad..(i + 1) * ad].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * sd..(i + 1) * sd].to_vec(),
            done: self.dones[i],
        }
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Batch {
        let idx: Vec<usize> = (0..batch_size).map(|_| rng.gen_range(0..self.len())).collect();
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (sd, ad) = (self.state_dim, self.action_dim);
        let n = idx.len();
        let mut states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        let mut next_states = Array2::zeros((n, sd));
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for (row, &i) in idx.iter().enumerate() {
            for k in 0..sd {
                states[[row, k]] = self.states[i * sd + k];
                next_states[[row, k]] = self.next_states[i * sd + k];
            }
            for k in 0..ad {
                actions[[row, k]] = self.actions[i * ad + k];
            }
            rewards.push(self.rewards[i]);
            dones.push(self.dones[i]);
        }
        Batch {
            states,
            actions,
            rewards,
            next_states,
            dones,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    /// The buffer held fewer than `batch_size` transitions; nothing changed.
    pub skipped: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("architecture mismatch: expected {expected}, file has {found}")]
    Architecture { expected: String, found: String },
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"JLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Network shapes of an agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Architecture {
    fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.state_dim];
        s.extend(&self.actor_hidden);
        s.push(self.action_dim);
        s
    }

    fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.state_dim + self.action_dim];
        s.extend(&self.critic_hidden);
        s.push(1);
        s
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "state {} action {} actor {:?} critic {:?}",
            self.state_dim, self.action_dim, self.actor_hidden, self.critic_hidden
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Td3Agent {
    pub arch: Architecture,
    pub cfg: Td3Config,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    pub actor_opt: Adam,
    pub critic1_opt: Adam,
    pub critic2_opt: Adam,
    /// Gradient steps taken.
    pub train_steps: u64,
    /// Environment episodes seen (drives the warm-up phase).
    pub episodes: u64,
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, cfg: Td3Config, rng: &mut R) -> Self {
        let actor = Mlp::new(&arch.actor_sizes(), OutputActivation::Tanh, 1e-2, rng);
        let critic1 = Mlp::new(&arch.critic_sizes(), OutputActivation::Identity, 1.0, rng);
        let critic2 = Mlp::new(&arch.critic_sizes(), OutputActivation::Identity, 1.0, rng);
        Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic1_opt: Adam::new(&critic1, cfg.critic_lr),
            critic2_opt: Adam::new(&critic2, cfg.critic_lr),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            arch,
            cfg,
            train_steps: 0,
            episodes: 0,
        }
    }

    /// Deterministic policy output.
    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        self.actor.forward(state).expect("state dimension matches actor")
    }

    /// Exploration policy: uniform in `[-1, 1]ᵈ` while `warmup`, otherwise
    /// the actor output plus Gaussian noise of standard deviation
    /// `noise_scale`, clamped to `[-1, 1]`.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[f64], noise_scale: f64, warmup: bool, rng: &mut R) -> Vec<f64> {
        if warmup {
            return (0..self.arch.action_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        }
        let mut a = self.act(state);
        if noise_scale > 0.0 {
            let normal = Normal::new(0.0, noise_scale).expect("finite noise scale");
            for v in &mut a {
                *v += normal.sample(rng);
            }
        }
        for v in &mut a {
            *v = v.clamp(-1.0, 1.0);
        }
        a
    }

    fn critic_input(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        ndarray::concatenate(Axis(1), &[states.view(), actions.view()]).expect("same batch size")
    }

    /// Regression targets for a batch.
    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Vec<f64> {
        if batch.dones.iter().all(|d| *d) {
            return batch.rewards.clone();
        }
        let mut next_a = self.actor_target.forward_batch(batch.next_states.view()).expect("dims");
        let normal = Normal::new(0.0, self.cfg.policy_noise.max(f64::MIN_POSITIVE)).unwrap();
        next_a.mapv_inplace(|a| {
            let eps = if self.cfg.policy_noise > 0.0 {
                normal.sample(rng).clamp(-self.cfg.noise_clip, self.cfg.noise_clip)
            } else {
                0.0
            };
            (a + eps).clamp(-1.0, 1.0)
        });
        let x = Self::critic_input(&batch.next_states, &next_a);
        let q1 = self.critic1_target.forward_batch(x.view()).expect("dims");
        let q2 = self.critic2_target.forward_batch(x.view()).expect("dims");
        batch
            .rewards
            .iter()
            .zip(&batch.dones)
            .enumerate()
            .map(|(i, (r, done))| {
                if *done {
                    *r
                } else {
                    r + self.cfg.gamma * twin_min(q1[[i, 0]], q2[[i, 0]])
                }
            })
            .collect()
    }

    /// One critic regression step per critic on `(batch, targets)`;
    /// returns the mean of the two MSE losses before the step.
    pub fn critic_step(&mut self, batch: &Batch, targets: &[f64]) -> f64 {
        let x = Self::critic_input(&batch.states, &batch.actions);
        let n = targets.len() as f64;
        let mut loss = 0.0;
        for (critic, opt) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ] {
            let cache = critic.forward_cached(x.view()).expect("dims");
            let mut grad = Array2::zeros((targets.len(), 1));
            for (i, y) in targets.iter().enumerate() {
                let err = cache.output[[i, 0]] - y;
                loss += err * err / n;
                grad[[i, 0]] = 2.0 * err / n;
            }
            let (g, _) = critic.backward(&cache, grad.view());
            opt.update(critic, &g);
        }
        loss / 2.0
    }

    /// Deterministic policy-gradient step: ascend `Q1(s, π(s))`. Returns the
    /// actor loss `-mean Q1` before the step.
    pub fn actor_step(&mut self, states: &Array2<f64>) -> f64 {
        let n = states.nrows();
        let actor_cache = self.actor.forward_cached(states.view()).expect("dims");
        let x = Self::critic_input(states, &actor_cache.output);
        let critic_cache = self.critic1.forward_cached(x.view()).expect("dims");
        let loss = -critic_cache.output.mean().unwrap_or(0.0);
        let grad_q = Array2::from_elem((n, 1), -1.0 / n as f64);
        let (_, grad_x) = self.critic1.backward(&critic_cache, grad_q.view());
        let grad_a = grad_x.slice(s![.., self.arch.state_dim..]).to_owned();
        let (g, _) = self.actor.backward(&actor_cache, grad_a.view());
        self.actor_opt.update(&mut self.actor, &g);
        loss
    }

    pub fn update_targets(&mut self) {
        let tau = self.cfg.tau;
        self.actor_target.soft_update(&self.actor, tau);
        self.critic1_target.soft_update(&self.critic1, tau);
        self.critic2_target.soft_update(&self.critic2, tau);
    }

    /// One TD3 iteration: critic regression every call, actor and target
    /// updates every `policy_delay` calls.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> TrainStats {
        if buffer.len() < self.cfg.batch_size {
            log::debug!(
                "replay buffer holds {} < {} transitions, skipping update",
                buffer.len(),
                self.cfg.batch_size
            );
            return TrainStats {
                skipped: true,
                ..Default::default()
            };
        }
        self.train_steps += 1;
        let batch = buffer.sample(self.cfg.batch_size, rng);
        let targets = self.critic_targets(&batch, rng);
        let critic_loss = self.critic_step(&batch, &targets);
        let mut actor_loss = None;
        if self.train_steps.is_multiple_of(self.cfg.policy_delay as u64) {
            actor_loss = Some(self.actor_step(&batch.states));
            self.update_targets();
        }
        TrainStats {
            critic_loss,
            actor_loss,
            skipped: false,
        }
    }

    /// Binary checkpoint; see the crate README for the byte layout.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for d in [self.arch.state_dim, self.arch.action_dim] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for h in [&self.arch.actor_hidden, &self.arch.critic_hidden] {
            w.write_all(&(h.len() as u32).to_le_bytes())?;
            for s in h {
                w.write_all(&(*s as u32).to_le_bytes())?;
            }
        }
        w.write_all(&self.train_steps.to_le_bytes())?;
        w.write_all(&self.episodes.to_le_bytes())?;
        let cfg = toml::to_string(&self.cfg).map_err(io::Error::other)?;
        w.write_all(&(cfg.len() as u32).to_le_bytes())?;
        w.write_all(cfg.as_bytes())?;
        for net in [
            &self.actor,
            &self.actor_target,
            &self.critic1,
            &self.critic2,
            &self.critic1_target,
            &self.critic2_target,
        ] {
            net.write_to(w)?;
        }
        self.actor_opt.write_to(w)?;
        self.critic1_opt.write_to(w)?;
        self.critic2_opt.write_to(w)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let state_dim = read_u32(r)? as usize;
        let action_dim = read_u32(r)? as usize;
        let mut hidden = Vec::new();
        for _ in 0..2 {
            let n = read_u32(r)? as usize;
            if n > 64 {
                return Err(NnError::Corrupt(format!("implausible hidden layer count {n}")).into());
            }
            hidden.push((0..n).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?);
        }
        let critic_hidden = hidden.pop().unwrap();
        let actor_hidden = hidden.pop().unwrap();
        let arch = Architecture {
            state_dim,
            action_dim,
            actor_hidden,
            critic_hidden,
        };
        let train_steps = read_u64(r)?;
        let episodes = read_u64(r)?;
        let cfg_len = read_u32(r)? as usize;
        if cfg_len > 1 << 20 {
            return Err(NnError::Corrupt("implausible config length".into()).into());
        }
        let mut cfg_bytes = vec![0u8; cfg_len];
        r.read_exact(&mut cfg_bytes)?;
        let cfg: Td3Config = std::str::from_utf8(&cfg_bytes)
            .ok()
            .and_then(|s| toml::from_str(s).ok())
            .ok_or_else(|| NnError::Corrupt("embedded TD3 config unreadable".into()))?;

        let mut nets = Vec::with_capacity(6);
        for i in 0..6 {
            let net = Mlp::read_from(r)?;
            let expected = if i < 2 { arch.actor_sizes() } else { arch.critic_sizes() };
            if net.sizes() != expected {
                return Err(NnError::Corrupt(format!(
                    "network {i} has sizes {:?}, header says {expected:?}",
                    net.sizes()
                ))
                .into());
            }
            nets.push(net);
        }
        let mut it = nets.into_iter();
        let (actor, actor_target, critic1, critic2, critic1_target, critic2_target) = (
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        );
        let actor_opt = Adam::read_from(r, &actor)?;
        let critic1_opt = Adam::read_from(r, &critic1)?;
        let critic2_opt = Adam::read_from(r, &critic2)?;
        Ok(Self {
            arch,
            cfg,
            actor,
            actor_target,
            critic1,
            critic2,
            critic1_target,
            critic2_target,
            actor_opt,
            critic1_opt,
            critic2_opt,
            train_steps,
            episodes,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    /// Loads a checkpoint and checks it has the expected architecture.
    pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: &Architecture) -> Result<Self, CheckpointError> {
        let agent = Self::load_checkpoint(path)?;
        if &agent.arch != expected {
            return Err(CheckpointError::Architecture {
                expected: expected.to_string(),
                found: agent.arch.to_string(),
            });
        }
        Ok(agent)
    }
}

/// Clipped double-Q estimate.
pub fn twin_min(q1: f64, q2: f64) -> f64 {
    q1.min(q2)
}
