//! Point-mass vehicle moving along a fixed path under a commanded
//! longitudinal acceleration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Path, Vec2};

/// Kinematic state of one vehicle.
///
/// Velocity is always tangent to the path at `s_along`; only its magnitude
/// is controlled. `a_next` carries the last commanded acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub a_next: f64,
    pub s_along: f64,
    /// Set once the vehicle reaches the end of its path; the state is frozen
    /// from then on.
    pub exited: bool,
}

impl VehicleState {
    /// Places a vehicle at arc length `s_along` with the given speed.
    pub fn on_path(path: &Path, s_along: f64, speed: f64) -> Self {
        let s = s_along.clamp(0.0, path.length());
        let (p, t) = path.pose_at(s);
        let v = speed.max(0.0);
        VehicleState {
            x: p.x,
            y: p.y,
            vx: t.x * v,
            vy: t.y * v,
            a_next: 0.0,
            s_along: s,
            exited: s >= path.length(),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn speed(&self) -> f64 {
        self.velocity().norm()
    }
}

/// Arc-length slack when deciding that a vehicle reached its path end, m.
const EXIT_TOL: f64 = 1e-9;

/// Advance one vehicle by `dt` seconds under constant acceleration `a`.
///
/// Speed never goes negative: if braking would reverse the vehicle, motion
/// stops at the instant speed reaches zero. A vehicle already at rest that is
/// told to brake stays put and records zero acceleration, since holding the
/// brake at standstill is not a maneuver. Reaching the end of the path marks
/// the vehicle exited.
pub fn step_vehicle(state: &VehicleState, path: &Path, a: f64, dt: f64) -> Result<VehicleState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("time step must be positive, got {dt}")));
    }
    if !a.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("acceleration must be finite, got {a}")));
    }
    if state.exited {
        return Ok(*state);
    }
    let (speed, ds) = advance_speed(state.speed(), a, dt);
    let mut s = state.s_along + ds;
    let mut exited = false;
    if s >= path.length() - EXIT_TOL {
        s = path.length();
        exited = true;
    }
    let (p, t) = path.pose_at(s);
    let at_rest = state.speed() == 0.0 && a <= 0.0;
    Ok(VehicleState {
        x: p.x,
        y: p.y,
        vx: t.x * speed,
        vy: t.y * speed,
        a_next: if at_rest { 0.0 } else { a },
        s_along: s,
        exited,
    })
}

/// New speed and travelled distance after `dt` under acceleration `a`,
/// truncating the motion when speed reaches zero.
pub fn advance_speed(speed: f64, a: f64, dt: f64) -> (f64, f64) {
    let v_end = speed + a * dt;
    if v_end >= 0.0 {
        (v_end, speed * dt + 0.5 * a * dt * dt)
    } else {
        // a < 0 here; stop at t = speed / -a.
        let t_stop = speed / -a;
        (0.0, speed * t_stop + 0.5 * a * t_stop * t_stop)
    }
}
