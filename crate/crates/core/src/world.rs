//! Joint two-vehicle state and the pairwise safety measures derived from it.

use serde::{Deserialize, Serialize};

use crate::geometry::{conflict_point, euclidean_distance, ConflictPoint, Path, Vec2};
use crate::vehicle::{advance_speed, step_vehicle, VehicleState};

/// Both vehicles at one instant. Vehicle 1 is the target (possibly
/// malicious), vehicle 2 is the autonomous ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub target: VehicleState,
    pub ego: VehicleState,
    pub t: f64,
}

impl JointState {
    /// True when both vehicles are still on their paths.
    pub fn both_active(&self) -> bool {
        !self.target.exited && !self.ego.exited
    }

    pub fn distance(&self) -> f64 {
        euclidean_distance(self.target.position(), self.ego.position())
    }

    /// Time to collision; `+inf` whenever either vehicle has exited.
    pub fn ttc(&self) -> f64 {
        time_to_collision(self)
    }
}

/// Static geometry shared by both vehicles during an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub target_path: Path,
    pub ego_path: Path,
    /// Intersection (or roundabout) centre.
    pub center: Vec2,
    pub conflict: Option<ConflictPoint>,
    /// Arc length at which the ego leaves the intersection region.
    pub ego_exit_s: f64,
}

impl Scene {
    pub fn new(target_path: Path, ego_path: Path, center: Vec2, ego_exit_s: f64) -> Self {
        let conflict = conflict_point(&target_path, &ego_path);
        Scene {
            target_path,
            ego_path,
            center,
            conflict,
            ego_exit_s,
        }
    }

    /// Remaining arc length from the ego to the conflict point, clamped at
    /// zero once passed. `None` without a conflict.
    pub fn ego_to_conflict(&self, ego: &VehicleState) -> Option<f64> {
        self.conflict.map(|c| (c.s_second - ego.s_along).max(0.0))
    }

    pub fn target_to_conflict(&self, target: &VehicleState) -> Option<f64> {
        self.conflict.map(|c| (c.s_first - target.s_along).max(0.0))
    }

    /// Both vehicles advanced by `horizon` seconds under constant
    /// accelerations.
    pub fn predict(&self, s: &JointState, a_ego: f64, a_target: f64, horizon: f64) -> JointState {
        let target = step_vehicle(&s.target, &self.target_path, a_target, horizon).unwrap_or(s.target);
        let ego = step_vehicle(&s.ego, &self.ego_path, a_ego, horizon).unwrap_or(s.ego);
        JointState {
            target,
            ego,
            t: s.t + horizon,
        }
    }

    /// Smallest inter-vehicle distance while both vehicles move from `s`
    /// under constant accelerations for `horizon` seconds, sampled at
    /// `samples + 1` evenly spaced instants. Infinite once either vehicle
    /// has exited.
    pub fn closest_approach(&self, s: &JointState, a_ego: f64, a_target: f64, horizon: f64, samples: usize) -> f64 {
        if !s.both_active() {
            return f64::INFINITY;
        }
        let pos = |path: &Path, v: &VehicleState, a: f64, h: f64| {
            let (_, ds) = advance_speed(v.speed(), a, h);
            path.point_at(v.s_along + ds)
        };
        let n = samples.max(1);
        (0..=n)
            .map(|k| {
                let h = horizon * k as f64 / n as f64;
                euclidean_distance(
                    pos(&self.target_path, &s.target, a_target, h),
                    pos(&self.ego_path, &s.ego, a_ego, h),
                )
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// First time, within `horizon`, at which the vehicles come closer than
    /// `radius` while both keep their current speeds along their paths.
    /// Sampled every `step` seconds; `+inf` if it never happens or either
    /// vehicle has exited.
    pub fn path_ttc(&self, s: &JointState, radius: f64, horizon: f64, step: f64) -> f64 {
        if !s.both_active() {
            return f64::INFINITY;
        }
        let (vt, ve) = (s.target.speed(), s.ego.speed());
        let n = libm::ceil(horizon / step) as usize;
        for k in 0..=n {
            let h = (k as f64 * step).min(horizon);
            let (st, se) = (s.target.s_along + vt * h, s.ego.s_along + ve * h);
            if st >= self.target_path.length() || se >= self.ego_path.length() {
                // one of them has left; they no longer interact
                break;
            }
            if euclidean_distance(self.target_path.point_at(st), self.ego_path.point_at(se)) < radius {
                return h;
            }
        }
        f64::INFINITY
    }
}

/// Time of closest approach under constant relative velocity.
///
/// With `r = p1 - p2` and `v = v1 - v2`, returns `-(r . v) / |v|^2` when that
/// is strictly positive (vehicles converging) and `+inf` otherwise.
pub fn closest_approach_time(p1: Vec2, v1: Vec2, p2: Vec2, v2: Vec2) -> f64 {
    let r = p1 - p2;
    let v_rel = v1 - v2;
    let speed_sq = v_rel.norm_sq();
    if !(speed_sq > 0.0) {
        return f64::INFINITY;
    }
    let t = -r.dot(v_rel) / speed_sq;
    if t > 0.0 && t.is_finite() {
        t
    } else {
        f64::INFINITY
    }
}

/// TTC of the joint state. Exited vehicles no longer interact.
pub fn time_to_collision(s: &JointState) -> f64 {
    if !s.both_active() {
        return f64::INFINITY;
    }
    closest_approach_time(
        s.target.position(),
        s.target.velocity(),
        s.ego.position(),
        s.ego.velocity(),
    )
}
