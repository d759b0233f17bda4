//! Physics-informed episode reward.
//!
//! `R = max(0, R_lt - Σ C_i)` over eight costs: four path constraints
//! accumulated over the thrust (unilaterality, friction cone, joint range,
//! torque), the singularity and no-touchdown penalties, the lift-off
//! tracking error and the physical-feasibility abort penalty.

use serde::{Deserialize, Serialize};

use crate::ballistics::LiftoffState;
use crate::config::{ConfigError, RobotModel};
use crate::sim::{EpisodeOutcome, StepRecord, TerminationCause};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub unilateral: f64,
    pub friction: f64,
    pub joint_range: f64,
    pub torque: f64,
    pub singularity: f64,
    pub liftoff_tracking: f64,
    pub no_touchdown: f64,
    pub physical_feasibility: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            unilateral: 1.0,
            friction: 1.0,
            joint_range: 1.0,
            torque: 1.0,
            singularity: 1.0,
            liftoff_tracking: 1.0,
            no_touchdown: 1.0,
            physical_feasibility: 1.0,
        }
    }
}

impl CostWeights {
    fn as_array(&self) -> [(&'static str, f64); 8] {
        [
            ("unilateral", self.unilateral),
            ("friction", self.friction),
            ("joint_range", self.joint_range),
            ("torque", self.torque),
            ("singularity", self.singularity),
            ("liftoff_tracking", self.liftoff_tracking),
            ("no_touchdown", self.no_touchdown),
            ("physical_feasibility", self.physical_feasibility),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Landing reward scale.
    pub beta: f64,
    /// Distance gain [1/m].
    pub k: f64,
    /// Denominator offset; the landing reward peaks at `beta / eps`.
    pub eps: f64,
    /// Velocity-error weight in the lift-off tracking cost [s].
    pub alpha: f64,
    /// Penalty for actions whose apex is below the target.
    pub c_ph: f64,
    /// Penalty for episodes that end without touchdown.
    pub c_td: f64,
    /// Penalty for reaching a singular configuration.
    pub c_sing: f64,
    pub weights: CostWeights,
    pub clamp_positive: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            k: 10.0,
            eps: 0.01,
            alpha: 0.1,
            c_ph: 1.0,
            c_td: 1.0,
            c_sing: 1.0,
            weights: CostWeights::default(),
            clamp_positive: true,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [
            ("train.reward.beta", self.beta),
            ("train.reward.k", self.k),
            ("train.reward.eps", self.eps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid {
                    field: field.into(),
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        for (field, v) in [
            ("train.reward.alpha", self.alpha),
            ("train.reward.c_ph", self.c_ph),
            ("train.reward.c_td", self.c_td),
            ("train.reward.c_sing", self.c_sing),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid {
                    field: field.into(),
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        for (name, w) in self.weights.as_array() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(ConfigError::Invalid {
                    field: format!("train.reward.weights.{name}"),
                    reason: format!("must be >= 0, got {w}"),
                });
            }
        }
        Ok(())
    }

    pub fn max_reward(&self) -> f64 {
        self.beta / self.eps
    }
}

/// The eight episode costs, already weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    pub unilateral: f64,
    pub friction: f64,
    pub joint_range: f64,
    pub torque: f64,
    pub singularity: f64,
    pub liftoff_tracking: f64,
    pub no_touchdown: f64,
    pub physical_feasibility: f64,
}

impl Costs {
    pub const NAMES: [&'static str; 8] = [
        "unilateral",
        "friction",
        "joint_range",
        "torque",
        "singularity",
        "liftoff_tracking",
        "no_touchdown",
        "physical_feasibility",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.unilateral,
            self.friction,
            self.joint_range,
            self.torque,
            self.singularity,
            self.liftoff_tracking,
            self.no_touchdown,
            self.physical_feasibility,
        ]
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    /// Sum of the four thrust-phase path costs.
    pub fn path_total(&self) -> f64 {
        self.unilateral + self.friction + self.joint_range + self.torque
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_lt: f64,
    pub costs: Costs,
    pub total: f64,
}

/// Zero inside `[lo, hi]`, otherwise the distance to the violated bound.
pub fn activation(x: f64, lo: f64, hi: f64) -> f64 {
    ((x - lo).min(0.0) + (x - hi).max(0.0)).abs()
}

/// Path-constraint costs accumulated over the thrust records, each step
/// weighted by `dt`.
pub fn path_costs(records: &[StepRecord], model: &RobotModel, dt: f64, cfg: &RewardConfig) -> Costs {
    let w = &cfg.weights;
    let mut c = Costs::default();
    for r in records {
        let fz = r.force.z;
        c.unilateral += activation(fz, 0.0, f64::INFINITY);
        c.friction += activation(r.force.xy().norm(), 0.0, model.mu * fz.max(0.0));
        for i in 0..3 {
            c.joint_range += activation(r.q[i], model.joint_lower[i], model.joint_upper[i]);
            c.torque += activation(r.tau_cmd[i], -model.tau_max, model.tau_max);
        }
    }
    c.unilateral *= w.unilateral * dt;
    c.friction *= w.friction * dt;
    c.joint_range *= w.joint_range * dt;
    c.torque *= w.torque * dt;
    c
}

/// `beta / (k |c - c_tg| + eps)`.
pub fn landing_reward(c: &Vec3, c_tg: &Vec3, cfg: &RewardConfig) -> f64 {
    cfg.beta / (cfg.k * (c - c_tg).norm() + cfg.eps)
}

/// Weighted distance between the achieved and the planned lift-off state.
pub fn liftoff_tracking_cost(actual: &LiftoffState, planned: &LiftoffState, cfg: &RewardConfig) -> f64 {
    cfg.weights.liftoff_tracking
        * ((actual.c_lo - planned.c_lo).norm() + cfg.alpha * (actual.cdot_lo - planned.cdot_lo).norm())
}

/// Complete reward of one episode. `planned` is the lift-off state the
/// action asked for (absent when the action was rejected before planning).
pub fn total_reward(
    outcome: &EpisodeOutcome,
    planned: Option<&LiftoffState>,
    c_tg: &Vec3,
    model: &RobotModel,
    dt: f64,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let mut costs = path_costs(&outcome.records, model, dt, cfg);
    let w = &cfg.weights;
    let mut r_lt = 0.0;
    match outcome.cause {
        TerminationCause::Touchdown => {
            if let Some(c) = outcome.c_touchdown {
                r_lt = landing_reward(&c, c_tg, cfg);
            }
        }
        TerminationCause::InfeasibleAction => {
            costs.physical_feasibility = w.physical_feasibility * cfg.c_ph;
        }
        TerminationCause::Singularity => {
            costs.singularity = w.singularity * cfg.c_sing;
        }
        TerminationCause::Timeout => {}
    }
    if outcome.cause != TerminationCause::Touchdown && outcome.cause != TerminationCause::InfeasibleAction {
        costs.no_touchdown = w.no_touchdown * cfg.c_td;
    }
    if let (Some(actual), Some(planned)) = (outcome.lo_actual.as_ref(), planned) {
        costs.liftoff_tracking = liftoff_tracking_cost(actual, planned, cfg);
    }
    let raw = r_lt - costs.total();
    let total = if cfg.clamp_positive { raw.max(0.0) } else { raw };
    RewardBreakdown { r_lt, costs, total }
}
