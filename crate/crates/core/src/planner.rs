//! Thrust planning: action → lift-off state → cubic Bézier CoM reference →
//! joint references sampled at the controller rate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ballistics::{LiftoffState, VERTICAL_JUMP_TOL};
use crate::config::{ActionBounds, RobotModel, SimConfig};
use crate::kinematics::{self, KinematicsError};
use crate::Vec3;

pub const ACTION_DIM: usize = 5;

/// Jump parameters: thrust time and lift-off position/velocity in
/// spherical coordinates of the jump plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub t_th: f64,
    pub r: f64,
    pub theta: f64,
    pub r_v: f64,
    pub theta_v: f64,
}

impl Action {
    /// Maps agent outputs in `[-1, 1]⁵` affinely onto the bounds.
    pub fn from_normalized(u: &[f64], bounds: &ActionBounds) -> Self {
        assert_eq!(u.len(), ACTION_DIM, "action vector must have 5 components");
        Self {
            t_th: bounds.t_th.from_unit(u[0]),
            r: bounds.r.from_unit(u[1]),
            theta: bounds.theta.from_unit(u[2]),
            r_v: bounds.r_v.from_unit(u[3]),
            theta_v: bounds.theta_v.from_unit(u[4]),
        }
    }

    pub fn to_normalized(&self, bounds: &ActionBounds) -> [f64; ACTION_DIM] {
        [
            bounds.t_th.to_unit(self.t_th),
            bounds.r.to_unit(self.r),
            bounds.theta.to_unit(self.theta),
            bounds.r_v.to_unit(self.r_v),
            bounds.theta_v.to_unit(self.theta_v),
        ]
    }

    pub fn within(&self, bounds: &ActionBounds) -> bool {
        bounds.t_th.contains(self.t_th)
            && bounds.r.contains(self.r)
            && bounds.theta.contains(self.theta)
            && bounds.r_v.contains(self.r_v)
            && bounds.theta_v.contains(self.theta_v)
    }
}

/// Heading of the jump plane. Zero for (near) vertical jumps.
pub fn jump_yaw(c_0: &Vec3, c_tg: &Vec3) -> f64 {
    let d = (c_tg - c_0).xy();
    if d.norm() < VERTICAL_JUMP_TOL {
        0.0
    } else {
        d.y.atan2(d.x)
    }
}

/// Lift-off state relative to the foot contact point.
pub fn action_to_liftoff(a: &Action, c_0: &Vec3, c_tg: &Vec3) -> LiftoffState {
    let yaw = jump_yaw(c_0, c_tg);
    liftoff_from_yaw(a, yaw)
}

pub fn liftoff_from_yaw(a: &Action, yaw: f64) -> LiftoffState {
    let (sy, cy) = yaw.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    let (sv, cv) = a.theta_v.sin_cos();
    LiftoffState {
        c_lo: Vec3::new(a.r * ct * cy, a.r * ct * sy, a.r * st),
        cdot_lo: Vec3::new(a.r_v * cv * cy, a.r_v * cv * sy, a.r_v * sv),
    }
}

/// Control points for a start at rest in `c_0` and the lift-off state `lo`
/// reached after `t_th` seconds.
pub fn bezier_control_points(c_0: &Vec3, lo: &LiftoffState, t_th: f64) -> [Vec3; 4] {
    let cdot_0 = Vec3::zeros();
    [
        *c_0,
        c_0 + cdot_0 * (t_th / 3.0),
        lo.c_lo - lo.cdot_lo * (t_th / 3.0),
        lo.c_lo,
    ]
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("execution time {t_exe} outside [0, {t_th}]")]
    TimeOutOfRange { t_exe: f64, t_th: f64 },
    #[error("thrust time must be positive, got {0}")]
    NonPositiveThrustTime(f64),
    #[error("reference at sample {sample} not reachable: {source}")]
    Unreachable {
        sample: usize,
        #[source]
        source: KinematicsError,
    },
}

/// Position and velocity on the curve at execution time `t_exe`.
pub fn eval_bezier(cp: &[Vec3; 4], t_th: f64, t_exe: f64) -> Result<(Vec3, Vec3), PlanError> {
    if t_th.is_nan() || t_th <= 0.0 {
        return Err(PlanError::NonPositiveThrustTime(t_th));
    }
    if !(0.0..=t_th).contains(&t_exe) {
        return Err(PlanError::TimeOutOfRange { t_exe, t_th });
    }
    let t = t_exe / t_th;
    let s = 1.0 - t;
    let eta = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
    let eta_dot = [s * s, 2.0 * s * t, t * t];
    let c = cp[0] * eta[0] + cp[1] * eta[1] + cp[2] * eta[2] + cp[3] * eta[3];
    let mut cdot = Vec3::zeros();
    for i in 0..3 {
        cdot += (cp[i + 1] - cp[i]) * (3.0 * eta_dot[i]);
    }
    Ok((c, cdot / t_th))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSample {
    pub t: f64,
    pub c_ref: Vec3,
    pub cdot_ref: Vec3,
    pub q_ref: Vec3,
    pub qd_ref: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThrustPlan {
    pub control_points: [Vec3; 4],
    /// Thrust time snapped to a whole number of controller steps [s].
    pub t_th: f64,
    pub yaw: f64,
    pub lo: LiftoffState,
    pub samples: Vec<PlanSample>,
}

impl ThrustPlan {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with columns `t,cx,cy,cz,q1,q2,q3`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "cx", "cy", "cz", "q1", "q2", "q3"])?;
        for s in &self.samples {
            w.write_record(
                [s.t, s.c_ref.x, s.c_ref.y, s.c_ref.z, s.q_ref.x, s.q_ref.y, s.q_ref.z]
                    .iter()
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples the thrust curve at `sim.dt` and converts every CoM reference
/// into joint references. The foot is the origin, so the hip-to-foot vector
/// is `-c`. IK is seeded with the previous sample to stay on one knee branch.
pub fn build_plan(
    model: &RobotModel,
    sim: &SimConfig,
    a: &Action,
    c_0: &Vec3,
    c_tg: &Vec3,
) -> Result<ThrustPlan, PlanError> {
    if a.t_th.is_nan() || a.t_th <= 0.0 {
        return Err(PlanError::NonPositiveThrustTime(a.t_th));
    }
    let steps = ((a.t_th / sim.dt).round() as usize).max(1);
    let t_th = steps as f64 * sim.dt;
    let yaw = jump_yaw(c_0, c_tg);
    let lo = liftoff_from_yaw(a, yaw);
    let cp = bezier_control_points(c_0, &lo, t_th);

    let mut hint = Vec3::from(model.q0);
    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = if i == steps { t_th } else { i as f64 * sim.dt };
        let (c_ref, cdot_ref) = eval_bezier(&cp, t_th, t)?;
        let sol = kinematics::ik(model, &(-c_ref), &hint)
            .map_err(|source| PlanError::Unreachable { sample: i, source })?;
        let qd_ref = kinematics::joint_velocity(model, &sol.q, &(-cdot_ref));
        hint = sol.q;
        samples.push(PlanSample {
            t,
            c_ref,
            cdot_ref,
            q_ref: sol.q,
            qd_ref,
        });
    }

    Ok(ThrustPlan {
        control_points: cp,
        t_th,
        yaw,
        lo,
        samples,
    })
}
