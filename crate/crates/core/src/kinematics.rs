//! Closed-form kinematics of the abduction/flexion/knee leg.
//!
//! Foot position relative to the hip:
//!
//! ```text
//! p = Rx(q1) * ( [0, d, 0] + Ry(q2) * ( [0, 0, -l1] + Ry(q3) * [0, 0, -l2] ) )
//! ```
//!
//! The sagittal part `s = (sx, 0, sz)` only depends on flexion and knee.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::config::RobotModel;
use crate::{Mat3, Vec3};

/// Distance from full extension under which a pose counts as singular [m].
pub const SINGULARITY_TOL: f64 = 1e-3;

/// IK solutions closer than this to full extension are flagged.
pub const NEAR_SINGULAR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: Vec3,
    pub qd: Vec3,
}

impl JointState {
    pub fn at_rest(q: Vec3) -> Self {
        Self { q, qd: Vec3::zeros() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootPose {
    /// Foot position relative to the hip [m].
    pub p: Vec3,
    pub v: Vec3,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("target {target:?} outside the leg workspace (|p| = {norm:.6} m)")]
    OutOfWorkspace { target: [f64; 3], norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: Vec3,
    /// The target lies within [`NEAR_SINGULAR_TOL`] of full extension.
    pub near_singular: bool,
}

fn sagittal(model: &RobotModel, q: &Vec3) -> (f64, f64) {
    let (l1, l2) = (model.upper_link, model.lower_link);
    let q23 = q[1] + q[2];
    let sx = -l1 * q[1].sin() - l2 * q23.sin();
    let sz = -l1 * q[1].cos() - l2 * q23.cos();
    (sx, sz)
}

/// Foot position relative to the hip.
pub fn fk(model: &RobotModel, q: &Vec3) -> Vec3 {
    let d = model.hip_offset;
    let (sx, sz) = sagittal(model, q);
    let (s1, c1) = q[0].sin_cos();
    Vec3::new(sx, c1 * d - s1 * sz, s1 * d + c1 * sz)
}

/// `∂fk/∂q`, columns ordered (abduction, flexion, knee).
pub fn jacobian(model: &RobotModel, q: &Vec3) -> Mat3 {
    let d = model.hip_offset;
    let l2 = model.lower_link;
    let (sx, sz) = sagittal(model, q);
    let (s1, c1) = q[0].sin_cos();
    let (s23, c23) = (q[1] + q[2]).sin_cos();
    Matrix3::new(
        0.0,
        sz,
        -l2 * c23,
        -s1 * d - c1 * sz,
        s1 * sx,
        -s1 * l2 * s23,
        c1 * d - s1 * sz,
        -c1 * sx,
        c1 * l2 * s23,
    )
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a <= -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

/// Joint angles that place the foot at `p` (hip frame).
///
/// The knee branch follows the sign of `hint[2]`; a zero hint selects the
/// knee-forward (positive) branch used by the nominal pose.
pub fn ik(model: &RobotModel, p: &Vec3, hint: &Vec3) -> Result<IkSolution, KinematicsError> {
    let (l1, l2, d) = (model.upper_link, model.lower_link, model.hip_offset);
    let out_of_reach = || KinematicsError::OutOfWorkspace {
        target: [p.x, p.y, p.z],
        norm: p.norm(),
    };
    if !p.iter().all(|v| v.is_finite()) {
        return Err(out_of_reach());
    }

    let yz2 = p.y * p.y + p.z * p.z;
    let sz2 = yz2 - d * d;
    if sz2 < -1e-15 {
        return Err(out_of_reach());
    }
    let sz = -sz2.max(0.0).sqrt();
    let sx = p.x;
    let q1 = wrap_angle(p.z.atan2(p.y) - sz.atan2(d));

    let reach2 = sx * sx + sz * sz;
    let reach = reach2.sqrt();
    let full = l1 + l2;
    if reach == 0.0 || reach > full + 1e-12 || reach < (l1 - l2).abs() - 1e-12 {
        return Err(out_of_reach());
    }
    let cos_knee = ((reach2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee_mag = cos_knee.acos();
    let q3 = if hint[2] < 0.0 { -knee_mag } else { knee_mag };

    // (-sx, -sz) = rho * (sin(q2 + beta), cos(q2 + beta))
    let alpha = (-sx).atan2(-sz);
    let beta = (l2 * q3.sin()).atan2(l1 + l2 * q3.cos());
    let q2 = wrap_angle(alpha - beta);

    Ok(IkSolution {
        q: Vec3::new(q1, q2, q3),
        near_singular: full - reach <= NEAR_SINGULAR_TOL,
    })
}

/// True when the CoM, expressed relative to the foot contact, has left the
/// ball of radius `r_max - tol`.
pub fn is_singular_with_tol(c: &Vec3, r_max: f64, tol: f64) -> bool {
    c.norm() >= r_max - tol
}

/// [`is_singular_with_tol`] with the default [`SINGULARITY_TOL`].
pub fn is_singular(c: &Vec3, r_max: f64) -> bool {
    is_singular_with_tol(c, r_max, SINGULARITY_TOL)
}

/// Joint velocities producing the foot velocity `v` at `q`. Within
/// [`SINGULARITY_TOL`] of full extension a damped least-squares inverse is
/// used instead of the plain inverse.
pub fn joint_velocity(model: &RobotModel, q: &Vec3, v: &Vec3) -> Vec3 {
    let j = jacobian(model, q);
    let reach = fk(model, q).norm();
    if model.leg_length() - reach > SINGULARITY_TOL {
        if let Some(x) = j.lu().solve(v) {
            return x;
        }
    }
    damped_solve(&j, v, 1e-6)
}

/// `Jᵀ (J Jᵀ + λ² I)⁻¹ v`.
pub fn damped_solve(j: &Mat3, v: &Vec3, damping: f64) -> Vec3 {
    let jjt = j * j.transpose() + Mat3::identity() * damping * damping;
    let y = jjt.cholesky().map(|c| c.solve(v)).unwrap_or_else(Vec3::zeros);
    j.transpose() * y
}
