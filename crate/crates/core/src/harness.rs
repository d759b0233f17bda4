//! Training and evaluation around the jump environment.
//!
//! One environment episode is one jump: the agent sees the initial CoM and
//! the target, emits a single normalized action, and receives the reward of
//! the resulting thrust + flight.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ballistics::{self, LiftoffState};
use crate::config::{Bound, Config, RegionConfig};
use crate::planner::{self, Action, ACTION_DIM};
use crate::reward::{self, Costs, RewardBreakdown};
use crate::sim::{self, EpisodeOutcome, TerminationCause};
use crate::td3::{Architecture, CheckpointError, ReplayBuffer, Td3Agent, TrainStats, Transition};
use crate::Vec3;

pub const STATE_DIM: usize = 6;
/// RPE at or below this is an accurate landing [%].
pub const ACCURATE_RPE: f64 = 10.0;
/// RPE assigned to an episode without touchdown [%].
pub const NO_TOUCHDOWN_RPE: f64 = 100.0;
/// Number of evaluation targets.
pub const GRID_SIZE: usize = 726;
/// Horizontal grid: integer offsets `(i, j)` with `i² + j² <= GRID_R2`.
/// There are exactly 121 of them, which with six heights gives 726 points.
const GRID_R2: i32 = 37;
const GRID_LEVELS: usize = 6;
const FRONT_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("target coincides with the initial CoM; relative error undefined")]
    UndefinedRpe,
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Vertical cylinder whose axis passes through `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec3,
    pub radius: f64,
    /// Absolute CoM heights.
    pub height: Bound,
}

impl Region {
    pub fn training(cfg: &RegionConfig, c_0: &Vec3) -> Self {
        Self {
            center: *c_0,
            radius: cfg.radius_max,
            height: cfg.height,
        }
    }

    /// Training region with the radius scaled by `scale`.
    pub fn scaled(cfg: &RegionConfig, c_0: &Vec3, scale: f64) -> Self {
        Self {
            radius: cfg.radius_max * scale,
            ..Self::training(cfg, c_0)
        }
    }

    pub fn horizontal_distance(&self, p: &Vec3) -> f64 {
        (p.xy() - self.center.xy()).norm()
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        self.horizontal_distance(p) <= self.radius + tol
            && p.z >= self.height.min - tol
            && p.z <= self.height.max + tol
    }
}

/// Uniform sample from the cylinder volume.
pub fn sample_target<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> Vec3 {
    let r = region.radius * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let z = if region.height.max > region.height.min {
        rng.gen_range(region.height.min..=region.height.max)
    } else {
        region.height.min
    };
    Vec3::new(region.center.x + r * phi.cos(), region.center.y + r * phi.sin(), z)
}

/// The 726 evaluation targets: 121 disk points on a square lattice of pitch
/// `radius / √37`, at six evenly spaced heights. Height-major, then `i`,
/// then `j`.
pub fn build_test_grid(region: &Region) -> Vec<Vec3> {
    let n = (GRID_R2 as f64).sqrt().floor() as i32;
    let pitch = region.radius / (GRID_R2 as f64).sqrt();
    let mut disk = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            if i * i + j * j <= GRID_R2 {
                disk.push((i as f64 * pitch, j as f64 * pitch));
            }
        }
    }
    debug_assert_eq!(disk.len() * GRID_LEVELS, GRID_SIZE);
    let mut grid = Vec::with_capacity(GRID_SIZE);
    for k in 0..GRID_LEVELS {
        let z = region.height.min + region.height.width() * k as f64 / (GRID_LEVELS - 1) as f64;
        for (dx, dy) in &disk {
            grid.push(Vec3::new(region.center.x + dx, region.center.y + dy, z));
        }
    }
    grid
}

/// Relative position error: touchdown error as a percentage of the jump
/// length.
pub fn rpe(c_touchdown: &Vec3, c_tg: &Vec3, c_0: &Vec3) -> Result<f64, HarnessError> {
    let length = (c_tg - c_0).norm();
    if length == 0.0 {
        return Err(HarnessError::UndefinedRpe);
    }
    Ok(100.0 * (c_touchdown - c_tg).norm() / length)
}

pub fn is_front(c_tg: &Vec3, c_0: &Vec3) -> bool {
    c_tg.x > c_0.x + FRONT_TOL
}

/// Affine scaling of positions by the training-region extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateNormalizer {
    center: Vec3,
    radius: f64,
    height: Bound,
}

impl StateNormalizer {
    pub fn new(region: &Region) -> Self {
        Self {
            center: region.center,
            radius: if region.radius > 0.0 { region.radius } else { 1.0 },
            height: if region.height.width() > 0.0 {
                region.height
            } else {
                Bound::new(region.height.min - 0.5, region.height.min + 0.5)
            },
        }
    }

    fn position(&self, p: &Vec3) -> [f64; 3] {
        [
            (p.x - self.center.x) / self.radius,
            (p.y - self.center.y) / self.radius,
            self.height.to_unit(p.z),
        ]
    }

    /// Agent state `(c, c_tg)`.
    pub fn state(&self, c: &Vec3, c_tg: &Vec3) -> [f64; STATE_DIM] {
        let a = self.position(c);
        let b = self.position(c_tg);
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }
}

/// Everything that happened in one jump.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpResult {
    pub action: Action,
    pub planned: Option<LiftoffState>,
    pub outcome: EpisodeOutcome,
    pub reward: RewardBreakdown,
}

impl JumpResult {
    pub fn cause(&self) -> TerminationCause {
        self.outcome.cause
    }
}

/// The jump environment: configuration plus the fixed initial CoM.
#[derive(Debug, Clone)]
pub struct JumpEnv {
    pub cfg: Config,
    pub c_0: Vec3,
    pub train_region: Region,
    pub normalizer: StateNormalizer,
}

impl JumpEnv {
    pub fn new(cfg: Config) -> Self {
        let c_0 = sim::initial_state(&cfg.robot).c;
        let train_region = Region::training(&cfg.train.region, &c_0);
        Self {
            normalizer: StateNormalizer::new(&train_region),
            train_region,
            c_0,
            cfg,
        }
    }

    pub fn test_region(&self, scale: f64) -> Region {
        Region::scaled(&self.cfg.train.region, &self.c_0, scale)
    }

    pub fn state(&self, c_tg: &Vec3) -> [f64; STATE_DIM] {
        self.normalizer.state(&self.c_0, c_tg)
    }

    /// Plans a normalized action for `c_tg`; `None` if the lift-off state
    /// cannot reach the target height or the thrust curve leaves the
    /// workspace.
    pub fn plan(&self, u: &[f64], c_tg: &Vec3) -> (Action, LiftoffState, Option<planner::ThrustPlan>) {
        let action = Action::from_normalized(u, &self.cfg.action_bounds);
        let lo = planner::action_to_liftoff(&action, &self.c_0, c_tg);
        if !ballistics::feasibility_check(&lo, c_tg, self.cfg.robot.g) {
            return (action, lo, None);
        }
        let plan = planner::build_plan(&self.cfg.robot, &self.cfg.sim, &action, &self.c_0, c_tg).ok();
        (action, lo, plan)
    }

    /// Runs one jump for the normalized action `u`.
    pub fn jump(&self, u: &[f64], c_tg: &Vec3) -> JumpResult {
        let (action, _, plan) = self.plan(u, c_tg);
        self.execute(action, plan, c_tg)
    }

    /// Simulates an already planned jump; `None` is a rejected action.
    pub fn execute(&self, action: Action, plan: Option<planner::ThrustPlan>, c_tg: &Vec3) -> JumpResult {
        let (outcome, planned) = match plan {
            Some(plan) => (
                sim::run_episode(&self.cfg.robot, &self.cfg.sim, &plan, c_tg),
                Some(plan.lo),
            ),
            None => (EpisodeOutcome::infeasible(), None),
        };
        let reward = reward::total_reward(
            &outcome,
            planned.as_ref(),
            c_tg,
            &self.cfg.robot,
            self.cfg.sim.dt,
            &self.cfg.train.reward,
        );
        JumpResult {
            action,
            planned,
            outcome,
            reward,
        }
    }

    /// RPE of a finished jump; jumps without touchdown score
    /// [`NO_TOUCHDOWN_RPE`].
    pub fn jump_rpe(&self, result: &JumpResult, c_tg: &Vec3) -> Result<f64, HarnessError> {
        match result.outcome.c_touchdown {
            Some(c) if result.outcome.cause == TerminationCause::Touchdown => rpe(&c, c_tg, &self.c_0),
            _ => Ok(NO_TOUCHDOWN_RPE),
        }
    }
}

pub fn architecture(cfg: &Config) -> Architecture {
    Architecture {
        state_dim: STATE_DIM,
        action_dim: ACTION_DIM,
        actor_hidden: cfg.train.actor_hidden.clone(),
        critic_hidden: cfg.train.critic_hidden.clone(),
    }
}

pub fn checkpoint_path(dir: &Path, episode: u64) -> PathBuf {
    dir.join(format!("checkpoint_{episode:07}.bin"))
}

/// Checkpoints in `dir` sorted by episode.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(u64, PathBuf)>, HarnessError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(ep) = name
            .strip_prefix("checkpoint_")
            .and_then(|s| s.strip_suffix(".bin"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            out.push((ep, path));
        }
    }
    out.sort();
    Ok(out)
}

pub const LOG_FILE: &str = "train_log.csv";

/// Header of the training log.
pub fn log_header() -> Vec<String> {
    let mut h: Vec<String> = ["episode", "tx", "ty", "tz", "a_t_th", "a_r", "a_theta", "a_r_v", "a_theta_v", "reward", "r_lt"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(Costs::NAMES.iter().map(|n| format!("cost_{n}")));
    h.extend(["cause", "critic_loss", "actor_loss"].iter().map(|s| s.to_string()));
    h
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: u64,
    pub target: Vec3,
    pub action: [f64; ACTION_DIM],
    pub reward: RewardBreakdown,
    pub cause: TerminationCause,
    pub stats: TrainStats,
}

impl EpisodeLog {
    fn record(&self) -> Vec<String> {
        let mut row = vec![self.episode.to_string()];
        row.extend(self.target.iter().map(|v| v.to_string()));
        row.extend(self.action.iter().map(|v| v.to_string()));
        row.push(self.reward.total.to_string());
        row.push(self.reward.r_lt.to_string());
        row.extend(self.reward.costs.values().iter().map(|v| v.to_string()));
        row.push(self.cause.to_string());
        if self.stats.skipped {
            row.push(String::new());
        } else {
            row.push(self.stats.critic_loss.to_string());
        }
        row.push(self.stats.actor_loss.map(|v| v.to_string()).unwrap_or_default());
        row
    }
}

/// Sequential TD3 training loop.
pub struct Trainer {
    pub env: JumpEnv,
    pub agent: Td3Agent,
    pub buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    target: Vec3,
    target_uses: usize,
}

impl Trainer {
    pub fn new(cfg: Config, seed: u64) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Td3Agent::new(architecture(&cfg), cfg.train.td3.clone(), &mut rng);
        Ok(Self::with_agent(cfg, agent, rng))
    }

    /// Continues from a checkpoint. The replay buffer is not part of a
    /// checkpoint and starts empty.
    pub fn resume(cfg: Config, checkpoint: &Path, seed: u64) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let agent = Td3Agent::load_checkpoint_expecting(checkpoint, &architecture(&cfg))?;
        let rng = ChaCha8Rng::seed_from_u64(seed ^ agent.episodes.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        Ok(Self::with_agent(cfg, agent, rng))
    }

    fn with_agent(cfg: Config, agent: Td3Agent, rng: ChaCha8Rng) -> Self {
        let buffer = ReplayBuffer::new(cfg.train.td3.buffer_capacity, STATE_DIM, ACTION_DIM);
        let env = JumpEnv::new(cfg);
        Self {
            target: env.c_0,
            target_uses: 0,
            env,
            agent,
            buffer,
            rng,
        }
    }

    pub fn episodes(&self) -> u64 {
        self.agent.episodes
    }

    /// Sample target → act → jump → store → train.
    pub fn episode(&mut self) -> EpisodeLog {
        let tcfg = &self.env.cfg.train;
        if self.target_uses == 0 {
            self.target = sample_target(&self.env.train_region, &mut self.rng);
        }
        self.target_uses = (self.target_uses + 1) % tcfg.tg_rep;
        let c_tg = self.target;
        let state = self.env.state(&c_tg);
        let warmup = (self.agent.episodes as usize) < tcfg.n_exp;
        let u = self
            .agent
            .select_action(&state, tcfg.td3.expl_noise, warmup, &mut self.rng);
        let result = self.env.jump(&u, &c_tg);
        self.buffer
            .push(Transition::terminal(state.to_vec(), u.clone(), result.reward.total));
        self.agent.episodes += 1;
        let mut stats = TrainStats {
            skipped: true,
            ..Default::default()
        };
        if self.agent.episodes.is_multiple_of(tcfg.n_train as u64) {
            stats = self.agent.train_step(&self.buffer, &mut self.rng);
        }
        let mut action = [0.0; ACTION_DIM];
        action.copy_from_slice(&u);
        EpisodeLog {
            episode: self.agent.episodes - 1,
            target: c_tg,
            action,
            reward: result.reward,
            cause: result.cause(),
            stats,
        }
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = checkpoint_path(dir, self.agent.episodes);
        self.agent.save_checkpoint(&path).map_err(io_err(&path))?;
        Ok(path)
    }

    /// Runs `episodes` more episodes, appending to `out_dir/train_log.csv`
    /// and writing a checkpoint at the start, every `checkpoint_every`
    /// episodes, and at the end.
    pub fn run(&mut self, episodes: u64, out_dir: &Path) -> Result<TrainSummary, HarnessError> {
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        let log_path = out_dir.join(LOG_FILE);
        let fresh = !log_path.exists();
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        let mut log = csv::Writer::from_writer(BufWriter::new(file));
        if fresh {
            log.write_record(log_header())?;
        }
        let every = self.env.cfg.train.checkpoint_every as u64;
        let mut checkpoints = vec![self.save_checkpoint(out_dir)?];
        let mut reward_sum = 0.0;
        let started = Instant::now();
        for _ in 0..episodes {
            let row = self.episode();
            reward_sum += row.reward.total;
            log.write_record(row.record())?;
            let ep = self.agent.episodes;
            if ep.is_multiple_of(every) {
                log.flush().map_err(io_err(&log_path))?;
                checkpoints.push(self.save_checkpoint(out_dir)?);
                log::info!(
                    "episode {ep}: mean reward {:.3} over the last {every}, {:.1}s elapsed",
                    reward_sum / every as f64,
                    started.elapsed().as_secs_f64()
                );
                reward_sum = 0.0;
            }
        }
        log.flush().map_err(io_err(&log_path))?;
        if episodes > 0 && !self.agent.episodes.is_multiple_of(every) {
            checkpoints.push(self.save_checkpoint(out_dir)?);
        }
        Ok(TrainSummary {
            episodes: self.agent.episodes,
            checkpoints,
            log: log_path,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub episodes: u64,
    pub checkpoints: Vec<PathBuf>,
    pub log: PathBuf,
}

/// Fresh training run of `episodes` episodes into `out_dir`.
pub fn train(cfg: Config, episodes: u64, out_dir: &Path, seed: u64) -> Result<TrainSummary, HarnessError> {
    let log_path = out_dir.join(LOG_FILE);
    if log_path.exists() {
        fs::remove_file(&log_path).map_err(io_err(&log_path))?;
    }
    Trainer::new(cfg, seed)?.run(episodes, out_dir)
}

/// Result of one noiseless evaluation jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub target: Vec3,
    pub rpe: f64,
    pub cause: TerminationCause,
    /// Sum of the thrust-phase constraint costs.
    pub path_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub points: Vec<EvalPoint>,
    pub mean_rpe_front: f64,
    pub mean_rpe_back: f64,
    pub feasible_count: usize,
    pub episode_tag: u64,
    /// Mean actor-forward plus thrust-planning time per target [s].
    pub mean_inference_time: f64,
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvalReport {
    pub fn mean_rpe(&self) -> f64 {
        mean(self.points.iter().map(|p| p.rpe))
    }

    /// Mean RPE over points inside (`true`) or outside (`false`) `region`.
    pub fn mean_rpe_where(&self, region: &Region, inside: bool) -> f64 {
        mean(
            self.points
                .iter()
                .filter(|p| region.contains(&p.target, 1e-9) == inside)
                .map(|p| p.rpe),
        )
    }

    /// Fraction of points whose thrust phase violated no path constraint.
    pub fn constraint_free_fraction(&self) -> f64 {
        let n = self.points.iter().filter(|p| p.path_cost == 0.0).count();
        n as f64 / self.points.len().max(1) as f64
    }

    /// Per-point CSV: `x,y,z,rpe,cause,path_cost`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "rpe", "cause", "path_cost"])?;
        for p in &self.points {
            w.write_record([
                p.target.x.to_string(),
                p.target.y.to_string(),
                p.target.z.to_string(),
                p.rpe.to_string(),
                p.cause.to_string(),
                p.path_cost.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Noiseless rollout of `agent` on every grid point.
pub fn evaluate(agent: &Td3Agent, env: &JumpEnv, grid: &[Vec3]) -> Result<EvalReport, HarnessError> {
    let mut points = Vec::with_capacity(grid.len());
    let mut inference = 0.0;
    for c_tg in grid {
        let t0 = Instant::now();
        let u = agent.act(&env.state(c_tg));
        let (action, _, plan) = env.plan(&u, c_tg);
        inference += t0.elapsed().as_secs_f64();
        let result = env.execute(action, plan, c_tg);
        points.push(EvalPoint {
            target: *c_tg,
            rpe: env.jump_rpe(&result, c_tg)?,
            cause: result.cause(),
            path_cost: result.reward.costs.path_total(),
        });
    }
    let front = |f: bool| mean(points.iter().filter(|p| is_front(&p.target, &env.c_0) == f).map(|p| p.rpe));
    Ok(EvalReport {
        mean_rpe_front: front(true),
        mean_rpe_back: front(false),
        feasible_count: points.iter().filter(|p| p.rpe <= ACCURATE_RPE).count(),
        episode_tag: agent.episodes,
        mean_inference_time: inference / grid.len().max(1) as f64,
        points,
    })
}

/// Loads `checkpoint`, evaluates it on the test grid scaled by `grid_scale`
/// and writes the per-point CSV to `out`.
pub fn evaluate_checkpoint(
    cfg: &Config,
    checkpoint: &Path,
    grid_scale: f64,
    out: Option<&Path>,
) -> Result<EvalReport, HarnessError> {
    let agent = Td3Agent::load_checkpoint_expecting(checkpoint, &architecture(cfg))?;
    let env = JumpEnv::new(cfg.clone());
    let grid = build_test_grid(&env.test_region(grid_scale));
    let report = evaluate(&agent, &env, &grid)?;
    if let Some(out) = out {
        let f = File::create(out).map_err(io_err(out))?;
        report.write_csv(BufWriter::new(f))?;
    }
    Ok(report)
}

/// One row of the RPE-versus-episodes curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub episode: u64,
    pub mean_rpe: f64,
    pub mean_rpe_front: f64,
    pub mean_rpe_back: f64,
    pub feasible_count: usize,
    pub constraint_free_fraction: f64,
}

impl SweepRow {
    pub fn from_report(r: &EvalReport) -> Self {
        Self {
            episode: r.episode_tag,
            mean_rpe: r.mean_rpe(),
            mean_rpe_front: r.mean_rpe_front,
            mean_rpe_back: r.mean_rpe_back,
            feasible_count: r.feasible_count,
            constraint_free_fraction: r.constraint_free_fraction(),
        }
    }
}

/// Evaluates every checkpoint in `dir` on the test grid and writes one CSV
/// row per checkpoint.
pub fn sweep_eval(cfg: &Config, dir: &Path, grid_scale: f64, out: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let checkpoints = list_checkpoints(dir)?;
    if checkpoints.is_empty() {
        return Err(HarnessError::Invalid(format!("no checkpoints in {}", dir.display())));
    }
    let mut rows = Vec::new();
    for (_, path) in &checkpoints {
        let report = evaluate_checkpoint(cfg, path, grid_scale, None)?;
        let row = SweepRow::from_report(&report);
        log::info!(
            "episode {}: front RPE {:.2}%, feasible {}",
            row.episode,
            row.mean_rpe_front,
            row.feasible_count
        );
        rows.push(row);
    }
    let f = File::create(out).map_err(io_err(out))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(out))?;
    Ok(rows)
}

/// Noiseless jump to `c_tg` with the trajectory written to `dump`.
pub fn replay(cfg: &Config, checkpoint: &Path, c_tg: &Vec3, dump: Option<&Path>) -> Result<(JumpResult, f64), HarnessError> {
    let agent = Td3Agent::load_checkpoint_expecting(checkpoint, &architecture(cfg))?;
    let env = JumpEnv::new(cfg.clone());
    if (c_tg - env.c_0).norm() == 0.0 {
        return Err(HarnessError::UndefinedRpe);
    }
    let u = agent.act(&env.state(c_tg));
    let result = env.jump(&u, c_tg);
    let rpe = env.jump_rpe(&result, c_tg)?;
    if let Some(path) = dump {
        let f = File::create(path).map_err(io_err(path))?;
        result
            .outcome
            .write_trajectory_csv(BufWriter::new(f), &cfg.robot, cfg.sim.dt)?;
    }
    Ok((result, rpe))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> JumpEnv {
        JumpEnv::new(Config::default())
    }

    #[test]
    fn grid_has_726_points_inside_test_cylinder() {
        let env = env();
        let region = env.test_region(1.2);
        let grid = build_test_grid(&region);
        assert_eq!(grid.len(), GRID_SIZE);
        assert!(grid.iter().all(|p| region.contains(p, 1e-12)));
        assert_eq!(grid, build_test_grid(&region));
        // no duplicates
        for (i, a) in grid.iter().enumerate() {
            for b in &grid[i + 1..] {
                assert!((a - b).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn grid_heights_and_outer_ring() {
        let region = env().test_region(1.2);
        let grid = build_test_grid(&region);
        let mut zs: Vec<f64> = grid.iter().map(|p| p.z).collect();
        zs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(zs.len(), 6);
        assert!((zs[0] - 0.25).abs() < 1e-12 && (zs[5] - 0.5).abs() < 1e-12);
        let train = env().train_region;
        let outside = grid.iter().filter(|p| !train.contains(p, 1e-9)).count();
        assert_eq!(outside, 6 * 40);
    }

    #[test]
    fn rpe_hand_value() {
        let c0 = Vec3::new(0.0, 0.0, 0.25);
        let tg = Vec3::new(0.5, 0.0, 0.3);
        let td = Vec3::new(0.55, 0.0, 0.3);
        let expected = 100.0 * 0.05 / (0.25f64 + 0.0025).sqrt();
        assert!((rpe(&td, &tg, &c0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 9.95).abs() < 0.01);
        assert_eq!(rpe(&tg, &tg, &c0).unwrap(), 0.0);
        assert!(matches!(rpe(&tg, &c0, &c0), Err(HarnessError::UndefinedRpe)));
    }

    #[test]
    fn rpe_invariant_under_yaw() {
        let c0 = Vec3::new(0.1, -0.2, 0.23);
        let tg = Vec3::new(0.4, 0.3, 0.35);
        let td = Vec3::new(0.45, 0.25, 0.3);
        let base = rpe(&td, &tg, &c0).unwrap();
        for k in 0..12 {
            let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), k as f64 * 0.5);
            let r = |p: &Vec3| c0 + rot * (p - c0);
            assert!((rpe(&r(&td), &r(&tg), &c0).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_region_samples_on_axis() {
        let c0 = Vec3::new(0.0, 0.0, 0.23);
        let region = Region {
            center: c0,
            radius: 0.0,
            height: Bound::new(0.3, 0.3),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let p = sample_target(&region, &mut rng);
            assert_eq!((p.x, p.y, p.z), (0.0, 0.0, 0.3));
        }
    }

    #[test]
    fn samples_stay_in_region() {
        let region = env().train_region;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            assert!(region.contains(&sample_target(&region, &mut rng), 1e-12));
        }
    }

    #[test]
    fn front_back_partition() {
        let env = env();
        let grid = build_test_grid(&env.test_region(1.2));
        let front = grid.iter().filter(|p| is_front(p, &env.c_0)).count();
        let back = grid.iter().filter(|p| !is_front(p, &env.c_0)).count();
        assert_eq!(front + back, grid.len());
        // columns i = 1..=6 hold 13+11+11+9+7+3 points each level
        assert_eq!(front, 6 * 54);
    }

    #[test]
    fn normalizer_maps_region_to_unit_box() {
        let env = env();
        let r = env.train_region;
        let s = env.state(&Vec3::new(r.center.x + r.radius, r.center.y, r.height.max));
        assert!((s[3] - 1.0).abs() < 1e-12 && s[4].abs() < 1e-12 && (s[5] - 1.0).abs() < 1e-12);
        let s = env.state(&Vec3::new(r.center.x, r.center.y - r.radius, r.height.min));
        assert!(s[3].abs() < 1e-12 && (s[4] + 1.0).abs() < 1e-12 && (s[5] + 1.0).abs() < 1e-12);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn unreachable_apex_is_infeasible() {
        let env = env();
        // slowest, flattest lift-off cannot reach 0.5 m
        let u = [0.0, 0.0, -1.0, -1.0, -1.0];
        let tg = Vec3::new(0.3, 0.0, 0.5);
        let res = env.jump(&u, &tg);
        assert_eq!(res.cause(), TerminationCause::InfeasibleAction);
        assert_eq!(res.reward.total, 0.0);
        assert_eq!(env.jump_rpe(&res, &tg).unwrap(), NO_TOUCHDOWN_RPE);
    }

    #[test]
    fn log_header_matches_rows() {
        let mut t = Trainer::new(
            Config {
                train: crate::config::TrainConfig {
                    actor_hidden: vec![8],
                    critic_hidden: vec![8],
                    ..Default::default()
                },
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let row = t.episode();
        assert_eq!(row.record().len(), log_header().len());
    }
}
