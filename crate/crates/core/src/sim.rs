//! Analytic thrust and flight simulation.
//!
//! Stance model: massless leg, point-mass body at the hip, foot pinned at
//! the origin. Joint torques map to the ground reaction through the leg
//! Jacobian, `F = -J⁻ᵀ τ`, and the body obeys `m c̈ = F - m g ẑ`. Joint
//! positions follow from the body position by inverse kinematics. The
//! integrator is semi-implicit Euler at `SimConfig::dt`.
//!
//! After lift-off the leg snaps to the nominal pose and the body flies
//! ballistically. A square platform centred under the target appears at the
//! apex; touchdown is the first descending crossing of the foot with the
//! platform top (inside its footprint) or with the ground.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ballistics::{self, LiftoffState};
use crate::config::{RobotModel, SimConfig};
use crate::kinematics::{self, SINGULARITY_TOL};
use crate::planner::ThrustPlan;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub c: Vec3,
    pub cdot: Vec3,
    pub q: Vec3,
    pub qd: Vec3,
    pub foot_contact: bool,
    pub t: f64,
}

/// One controller step of the thrust phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// Commanded torque before saturation [Nm].
    pub tau_cmd: Vec3,
    /// Applied torque [Nm].
    pub tau: Vec3,
    /// Ground reaction force on the foot [N].
    pub force: Vec3,
    pub q: Vec3,
    pub c: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationCause {
    Touchdown,
    Timeout,
    Singularity,
    InfeasibleAction,
}

impl TerminationCause {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Touchdown => "touchdown",
            Self::Timeout => "timeout",
            Self::Singularity => "singularity",
            Self::InfeasibleAction => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "touchdown" => Self::Touchdown,
            "timeout" => Self::Timeout,
            "singularity" => Self::Singularity,
            "infeasible" => Self::InfeasibleAction,
            _ => return None,
        })
    }
}

impl std::fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LandingSurface {
    Platform,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub cause: TerminationCause,
    pub c_touchdown: Option<Vec3>,
    pub surface: Option<LandingSurface>,
    pub lo_actual: Option<LiftoffState>,
    /// Simulated time of lift-off, and of the end of the episode [s].
    pub t_liftoff: Option<f64>,
    pub t_end: f64,
    pub records: Vec<StepRecord>,
}

impl EpisodeOutcome {
    pub fn infeasible() -> Self {
        Self {
            cause: TerminationCause::InfeasibleAction,
            c_touchdown: None,
            surface: None,
            lo_actual: None,
            t_liftoff: None,
            t_end: 0.0,
            records: Vec::new(),
        }
    }

    /// CSV with columns `t,cx,cy,cz,q1,q2,q3,tau1,tau2,tau3,fx,fy,fz` for
    /// the thrust phase, followed by flight samples every `dt` (joint, torque
    /// and force columns empty).
    pub fn write_trajectory_csv<W: Write>(&self, out: W, model: &RobotModel, dt: f64) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "cx", "cy", "cz", "q1", "q2", "q3", "tau1", "tau2", "tau3", "fx", "fy", "fz",
        ])?;
        for r in &self.records {
            let row = [
                r.t, r.c.x, r.c.y, r.c.z, r.q.x, r.q.y, r.q.z, r.tau.x, r.tau.y, r.tau.z, r.force.x,
                r.force.y, r.force.z,
            ];
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        if let (Some(lo), Some(t_lo)) = (self.lo_actual, self.t_liftoff) {
            let steps = ((self.t_end - t_lo) / dt).floor() as usize;
            for k in 0..=steps {
                let tf = (k as f64 * dt).min(self.t_end - t_lo);
                let c = lo.position_at(tf, model.g);
                let mut row = vec![(t_lo + tf).to_string(), c.x.to_string(), c.y.to_string(), c.z.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 9));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Torque holding the body weight at `q`: `-Jᵀ (m g ẑ)`.
pub fn gravity_compensation(model: &RobotModel, q: &Vec3) -> Vec3 {
    let j = kinematics::jacobian(model, q);
    -(j.transpose() * Vec3::new(0.0, 0.0, model.mass * model.g))
}

/// Ground reaction for joint torques `tau`, or `None` at a singular Jacobian.
pub fn contact_force(model: &RobotModel, q: &Vec3, tau: &Vec3) -> Option<Vec3> {
    let jt = kinematics::jacobian(model, q).transpose();
    jt.lu().solve(tau).map(|f| -f)
}

/// Initial rest state: nominal joints, foot at the origin.
pub fn initial_state(model: &RobotModel) -> SimState {
    let q0 = Vec3::from(model.q0);
    SimState {
        c: -kinematics::fk(model, &q0),
        cdot: Vec3::zeros(),
        q: q0,
        qd: Vec3::zeros(),
        foot_contact: true,
        t: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThrustResult {
    pub records: Vec<StepRecord>,
    /// `None` when the thrust ended in a singular configuration.
    pub lo_actual: Option<LiftoffState>,
    pub state: SimState,
}

/// One stance step from `state` towards the references; returns the record
/// and whether the contact force has stopped pushing.
fn stance_step(
    model: &RobotModel,
    dt: f64,
    state: &mut SimState,
    q_ref: &Vec3,
    qd_ref: &Vec3,
) -> Result<(StepRecord, bool), ()> {
    let tau_cmd = (q_ref - state.q) * model.p_gain
        + (qd_ref - state.qd) * model.d_gain
        + gravity_compensation(model, &state.q);
    let tau = tau_cmd.map(|t| t.clamp(-model.tau_max, model.tau_max));
    let force = contact_force(model, &state.q, &tau).ok_or(())?;
    let record = StepRecord {
        t: state.t,
        tau_cmd,
        tau,
        force,
        q: state.q,
        c: state.c,
    };
    if force.z <= 0.0 {
        return Ok((record, true));
    }

    let acc = force / model.mass - Vec3::new(0.0, 0.0, model.g);
    debug_assert!((acc * model.mass - (force - Vec3::new(0.0, 0.0, model.mass * model.g))).norm() < 1e-9);
    state.cdot += acc * dt;
    state.c += state.cdot * dt;
    state.t += dt;

    if kinematics::is_singular_with_tol(&state.c, model.leg_length(), SINGULARITY_TOL) {
        return Err(());
    }
    let sol = kinematics::ik(model, &(-state.c), &state.q).map_err(|_| ())?;
    state.q = sol.q;
    state.qd = kinematics::joint_velocity(model, &state.q, &(-state.cdot));
    Ok((record, false))
}

/// Tracks the plan with PD plus gravity compensation until the contact force
/// stops pushing or the plan is exhausted.
pub fn run_thrust(model: &RobotModel, sim: &SimConfig, plan: &ThrustPlan) -> ThrustResult {
    let mut state = initial_state(model);
    let mut records = Vec::with_capacity(plan.len());
    let steps = plan.len().saturating_sub(1);
    for k in 0..steps {
        let s = &plan.samples[k];
        match stance_step(model, sim.dt, &mut state, &s.q_ref, &s.qd_ref) {
            Ok((rec, lifted)) => {
                records.push(rec);
                if lifted {
                    break;
                }
            }
            Err(()) => {
                return ThrustResult {
                    records,
                    lo_actual: None,
                    state,
                };
            }
        }
    }
    state.foot_contact = false;
    ThrustResult {
        records,
        lo_actual: Some(LiftoffState::new(state.c, state.cdot)),
        state,
    }
}

/// Holds the references fixed at `q_ref` for `duration` seconds. Used to
/// check static equilibrium under gravity compensation.
pub fn hold_pose(model: &RobotModel, sim: &SimConfig, q_ref: &Vec3, duration: f64) -> (SimState, Vec<StepRecord>) {
    let mut state = initial_state(model);
    let steps = (duration / sim.dt).round() as usize;
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        match stance_step(model, sim.dt, &mut state, q_ref, &Vec3::zeros()) {
            Ok((rec, lifted)) => {
                records.push(rec);
                if lifted {
                    break;
                }
            }
            Err(()) => break,
        }
    }
    (state, records)
}

/// Where the flight from `lo` ends. Returns the flight duration, touchdown
/// CoM and surface.
pub fn flight_touchdown(
    model: &RobotModel,
    sim: &SimConfig,
    lo: &LiftoffState,
    c_tg: &Vec3,
) -> (f64, Vec3, LandingSurface) {
    let g = model.g;
    let foot = kinematics::fk(model, &Vec3::from(model.q0));
    let (_, apex_z) = ballistics::apex(lo, g);

    let platform_top = c_tg.z + foot.z;
    let pad = (c_tg + foot).xy();
    if platform_top > 0.0 && apex_z + foot.z >= platform_top {
        if let Some(t) = ballistics::descending_crossing(lo.c_lo.z + foot.z, lo.cdot_lo.z, platform_top, g) {
            let c = lo.position_at(t, g);
            let d = (c + foot).xy() - pad;
            if d.x.abs() <= sim.platform_half_extent && d.y.abs() <= sim.platform_half_extent {
                return (t, c, LandingSurface::Platform);
            }
        }
    }
    let t = ballistics::descending_crossing(lo.c_lo.z + foot.z, lo.cdot_lo.z, 0.0, g)
        .unwrap_or(0.0)
        .max(0.0);
    (t, lo.position_at(t, g), LandingSurface::Ground)
}

/// Thrust, flight and touchdown for one planned jump.
pub fn run_episode(model: &RobotModel, sim: &SimConfig, plan: &ThrustPlan, c_tg: &Vec3) -> EpisodeOutcome {
    let thrust = run_thrust(model, sim, plan);
    let t_lo = thrust.state.t;
    let Some(lo) = thrust.lo_actual else {
        return EpisodeOutcome {
            cause: TerminationCause::Singularity,
            c_touchdown: None,
            surface: None,
            lo_actual: None,
            t_liftoff: None,
            t_end: t_lo,
            records: thrust.records,
        };
    };

    let (t_fl, c_td, surface) = flight_touchdown(model, sim, &lo, c_tg);
    let t_end = t_lo + t_fl;
    if t_end > sim.timeout {
        return EpisodeOutcome {
            cause: TerminationCause::Timeout,
            c_touchdown: None,
            surface: None,
            lo_actual: Some(lo),
            t_liftoff: Some(t_lo),
            t_end: sim.timeout,
            records: thrust.records,
        };
    }
    EpisodeOutcome {
        cause: TerminationCause::Touchdown,
        c_touchdown: Some(c_td),
        surface: Some(surface),
        lo_actual: Some(lo),
        t_liftoff: Some(t_lo),
        t_end,
        records: thrust.records,
    }
}
