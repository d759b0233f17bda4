//! Physical and algorithmic configuration.
//!
//! Everything is read from one TOML file with four optional tables:
//! `[robot]`, `[action_bounds]`, `[sim]` and `[train]` (the latter with nested
//! `[train.td3]`, `[train.reward]`, `[train.region]`). Missing keys take the
//! defaults below; unknown keys are rejected so that typos do not silently
//! fall back to defaults.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::reward::RewardConfig;
use crate::td3::Td3Config;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub min: f64,
    pub max: f64,
}

impl Bound {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    /// Affine map of `u ∈ [-1, 1]` onto the interval; `u` is clamped first.
    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        self.min + 0.5 * (u + 1.0) * self.width()
    }

    /// Inverse of [`Bound::from_unit`].
    pub fn to_unit(&self, x: f64) -> f64 {
        2.0 * (x - self.min) / self.width() - 1.0
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(invalid(field, "bounds must be finite"));
        }
        if self.min >= self.max {
            return Err(invalid(
                field,
                format!("min ({}) must be < max ({})", self.min, self.max),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.min, self.max)
    }
}

/// Monopod parameters. Leg topology: hip abduction about x, hip flexion and
/// knee about y, both links hanging along -z at zero angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    /// Body mass [kg]; the leg is massless.
    pub mass: f64,
    /// Thigh length [m].
    pub upper_link: f64,
    /// Shank length [m].
    pub lower_link: f64,
    /// Lateral offset of the flexion axis from the abduction axis [m].
    pub hip_offset: f64,
    pub joint_lower: [f64; 3],
    pub joint_upper: [f64; 3],
    /// Symmetric actuator torque limit [Nm].
    pub tau_max: f64,
    /// Nominal configuration (abduction, flexion, knee) [rad].
    pub q0: [f64; 3],
    pub p_gain: f64,
    pub d_gain: f64,
    /// Foot/ground friction coefficient.
    pub mu: f64,
    pub g: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self {
            mass: 1.5,
            upper_link: 0.16,
            lower_link: 0.16,
            hip_offset: 0.0,
            joint_lower: [-2.5; 3],
            joint_upper: [2.5; 3],
            tau_max: 8.0,
            q0: [0.0, -0.75, 1.5],
            p_gain: 10.0,
            d_gain: 0.2,
            mu: 0.8,
            g: 9.81,
        }
    }
}

impl RobotModel {
    /// Full leg extension [m].
    pub fn leg_length(&self) -> f64 {
        self.upper_link + self.lower_link
    }

    pub fn validate(&self, bounds: &ActionBounds) -> Result<(), ConfigError> {
        let positive = [
            ("robot.mass", self.mass),
            ("robot.upper_link", self.upper_link),
            ("robot.lower_link", self.lower_link),
            ("robot.tau_max", self.tau_max),
            ("robot.mu", self.mu),
            ("robot.g", self.g),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        for (field, v) in [
            ("robot.hip_offset", self.hip_offset),
            ("robot.p_gain", self.p_gain),
            ("robot.d_gain", self.d_gain),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        for i in 0..3 {
            let (lo, hi) = (self.joint_lower[i], self.joint_upper[i]);
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(invalid(
                    format!("robot.joint_lower[{i}]"),
                    format!("must be < robot.joint_upper[{i}] ({lo} >= {hi})"),
                ));
            }
            if !(lo..=hi).contains(&self.q0[i]) {
                return Err(invalid(
                    format!("robot.q0[{i}]"),
                    format!("{} outside joint limits [{lo}, {hi}]", self.q0[i]),
                ));
            }
        }
        if self.leg_length() < bounds.r.max {
            return Err(invalid(
                "robot.upper_link",
                format!(
                    "leg length {} shorter than action_bounds.r.max {}",
                    self.leg_length(),
                    bounds.r.max
                ),
            ));
        }
        Ok(())
    }
}

/// Per-component bounds of the five-dimensional action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionBounds {
    /// Thrust duration [s].
    pub t_th: Bound,
    /// Lift-off CoM distance from the foot [m].
    pub r: Bound,
    /// Lift-off CoM elevation angle [rad].
    pub theta: Bound,
    /// Lift-off speed [m/s].
    pub r_v: Bound,
    /// Lift-off velocity elevation angle [rad].
    pub theta_v: Bound,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            t_th: Bound::new(0.2, 1.0),
            r: Bound::new(0.25, 0.32),
            theta: Bound::new(FRAC_PI_4, FRAC_PI_2),
            r_v: Bound::new(0.1, 4.0),
            theta_v: Bound::new(FRAC_PI_6, FRAC_PI_2),
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.t_th.validate("action_bounds.t_th")?;
        self.r.validate("action_bounds.r")?;
        self.theta.validate("action_bounds.theta")?;
        self.r_v.validate("action_bounds.r_v")?;
        self.theta_v.validate("action_bounds.theta_v")?;
        if self.t_th.min <= 0.0 {
            return Err(invalid("action_bounds.t_th", "min must be > 0"));
        }
        if self.r.min <= 0.0 {
            return Err(invalid("action_bounds.r", "min must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Controller and integrator step [s].
    pub dt: f64,
    /// Touchdown force threshold [N]. Touchdown itself is detected
    /// geometrically; the threshold is kept for static-contact checks.
    pub f_th: f64,
    /// Simulated-time budget of one episode [s].
    pub timeout: f64,
    /// Half side of the square landing platform [m].
    pub platform_half_extent: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            f_th: 1.0,
            timeout: 2.0,
            platform_half_extent: 0.025,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("sim.dt", self.dt),
            ("sim.timeout", self.timeout),
            ("sim.platform_half_extent", self.platform_half_extent),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        if !self.f_th.is_finite() || self.f_th < 0.0 {
            return Err(invalid("sim.f_th", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Cylindrical target region, as configured. Heights are absolute CoM
/// heights above the ground; the axis passes through the initial CoM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub radius_max: f64,
    pub height: Bound,
    /// Radius multiplier of the evaluation region.
    pub test_scale: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            radius_max: 0.65,
            height: Bound::new(0.25, 0.5),
            test_scale: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Episodes with uniformly random actions before the policy is used.
    pub n_exp: usize,
    /// Consecutive episodes that share one sampled target.
    pub tg_rep: usize,
    /// Episodes between gradient steps.
    pub n_train: usize,
    pub checkpoint_every: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub td3: Td3Config,
    pub reward: RewardConfig,
    pub region: RegionConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_exp: 1280,
            tg_rep: 5,
            n_train: 1,
            checkpoint_every: 5000,
            actor_hidden: vec![256, 512, 256],
            critic_hidden: vec![256, 512, 256],
            td3: Td3Config::default(),
            reward: RewardConfig::default(),
            region: RegionConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tg_rep == 0 {
            return Err(invalid("train.tg_rep", "must be >= 1"));
        }
        if self.n_train == 0 {
            return Err(invalid("train.n_train", "must be >= 1"));
        }
        if self.checkpoint_every == 0 {
            return Err(invalid("train.checkpoint_every", "must be >= 1"));
        }
        for (field, h) in [
            ("train.actor_hidden", &self.actor_hidden),
            ("train.critic_hidden", &self.critic_hidden),
        ] {
            if h.contains(&0) {
                return Err(invalid(field, "layer sizes must be >= 1"));
            }
        }
        if !(self.region.radius_max.is_finite() && self.region.radius_max >= 0.0) {
            return Err(invalid("train.region.radius_max", "must be >= 0"));
        }
        if self.region.height.min > self.region.height.max {
            return Err(invalid("train.region.height", "min must be <= max"));
        }
        if !(self.region.test_scale.is_finite() && self.region.test_scale > 0.0) {
            return Err(invalid("train.region.test_scale", "must be > 0"));
        }
        self.td3.validate()?;
        self.reward.validate()?;
        Ok(())
    }
}

/// The full configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: RobotModel,
    pub action_bounds: ActionBounds,
    pub sim: SimConfig,
    pub train: TrainConfig,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.action_bounds.validate()?;
        self.robot.validate(&self.action_bounds)?;
        self.sim.validate()?;
        self.train.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }
}

/// Reads, default-fills and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Config::from_toml_str(&text)
}
