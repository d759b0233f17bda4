//! Gravity-only CoM flight between lift-off and touchdown.

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Horizontal offsets below this are treated as a pure vertical jump [m].
pub const VERTICAL_JUMP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftoffState {
    pub c_lo: Vec3,
    pub cdot_lo: Vec3,
}

impl LiftoffState {
    pub fn new(c_lo: Vec3, cdot_lo: Vec3) -> Self {
        Self { c_lo, cdot_lo }
    }

    /// CoM position `t` seconds after lift-off.
    pub fn position_at(&self, t: f64, g: f64) -> Vec3 {
        let mut c = self.c_lo + self.cdot_lo * t;
        c.z -= 0.5 * g * t * t;
        c
    }

    pub fn velocity_at(&self, t: f64, g: f64) -> Vec3 {
        let mut v = self.cdot_lo;
        v.z -= g * t;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightResult {
    pub t_fl: f64,
    pub c_land: Vec3,
    pub apex_z: f64,
    pub apex_time: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BallisticsError {
    #[error("no horizontal lift-off velocity towards a horizontally displaced target")]
    DegenerateFlight,
}

/// Time and height of the flight apex. A downward lift-off velocity has its
/// apex at lift-off.
pub fn apex(lo: &LiftoffState, g: f64) -> (f64, f64) {
    let vz = lo.cdot_lo.z.max(0.0);
    let t = vz / g;
    (t, lo.c_lo.z + vz * vz / (2.0 * g))
}

/// Whether the apex reaches the target height. A `false` result means the
/// episode must be aborted without simulation.
pub fn feasibility_check(lo: &LiftoffState, c_tg: &Vec3, g: f64) -> bool {
    let (_, apex_z) = apex(lo, g);
    c_tg.z <= apex_z
}

/// Ballistic flight until the CoM reaches the target's horizontal position,
/// measured along the lift-off velocity in the jump plane.
pub fn propagate_flight(
    lo: &LiftoffState,
    c_tg: &Vec3,
    g: f64,
) -> Result<FlightResult, BallisticsError> {
    let (apex_time, apex_z) = apex(lo, g);
    let offset = (c_tg - lo.c_lo).xy();
    let vel = lo.cdot_lo.xy();
    let speed2 = vel.norm_squared();

    let t_fl = if offset.norm() < VERTICAL_JUMP_TOL {
        if speed2 > 0.0 {
            0.0
        } else {
            // back onto the lift-off height
            2.0 * lo.cdot_lo.z.max(0.0) / g
        }
    } else {
        if speed2 == 0.0 {
            return Err(BallisticsError::DegenerateFlight);
        }
        let t = offset.dot(&vel) / speed2;
        if t < 0.0 {
            return Err(BallisticsError::DegenerateFlight);
        }
        t
    };

    Ok(FlightResult {
        t_fl,
        c_land: lo.position_at(t_fl, g),
        apex_z,
        apex_time,
    })
}

/// Later root of `z0 + vz t - g t² / 2 = level`, or `None` if the height
/// never reaches `level`. The root may be negative when the body is already
/// below `level` and moving down.
pub fn descending_crossing(z0: f64, vz: f64, level: f64, g: f64) -> Option<f64> {
    let disc = vz * vz + 2.0 * g * (z0 - level);
    if disc < 0.0 {
        return None;
    }
    Some((vz + disc.sqrt()) / g)
}
