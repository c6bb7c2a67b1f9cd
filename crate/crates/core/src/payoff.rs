//! Per-vehicle payoffs: safety, efficiency and comfort terms, the TTC-driven
//! adaptive weighting, and the variant used for a malicious target.
//!
//! Every payoff term lies in `[0, 1]`. Terms that could leave that range for
//! reachable inputs are clamped (the TTC branch of the safety payoff below
//! `ttc_min`, comfort when `k3 > 1`, efficiency above the speed limit).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean_distance, Vec2};
use crate::math::exp;
use crate::world::{JointState, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffParams {
    /// Distance decay coefficient, 1/m.
    pub beta: f64,
    /// TTC sensitivity of the safety payoff.
    pub k1: f64,
    /// Efficiency sensitivity.
    pub k2: f64,
    /// Comfort sensitivity.
    pub k3: f64,
    /// Sensitivity of the adaptive safety weight.
    pub k: f64,
    /// Below this next-step speed the safety payoff uses distance decay, m/s.
    pub v_threshold: f64,
    pub ttc_min: f64,
    pub ttc_crit: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Legal maximum speed, m/s.
    pub v_max: f64,
    /// Distance decay constant of the malicious safety payoff, m.
    pub d_decay: f64,
    /// TTC decay constant of the malicious safety payoff, s.
    pub ttc_decay: f64,
    /// Speed floor used when converting remaining distance to time, m/s.
    pub v_floor: f64,
    /// How far ahead candidate actions are extrapolated when scoring them, s.
    pub lookahead: f64,
    /// Predicted separation below which a candidate counts as a contact and
    /// earns no safety payoff, m.
    pub contact_radius: f64,
    /// TTC used by the payoffs and the adaptive weight.
    pub ttc_model: TtcModel,
    /// Prediction horizon of [`TtcModel::PathContact`], s.
    pub ttc_horizon: f64,
    /// Separation counted as a conflict by [`TtcModel::PathContact`], m.
    pub safety_radius: f64,
}

/// How the payoffs measure time to collision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtcModel {
    /// Closest-approach time of the straight-line extrapolation.
    ClosestApproach,
    /// First time the vehicles, holding speed along their paths, come within
    /// `safety_radius`.
    PathContact,
}

impl Default for PayoffParams {
    fn default() -> Self {
        PayoffParams {
            beta: 0.05,
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
            k: 1.0,
            v_threshold: 2.0,
            ttc_min: 1.0,
            ttc_crit: 4.0,
            a_min: -5.0,
            a_max: 3.0,
            v_max: 12.0,
            d_decay: 10.0,
            ttc_decay: 2.0,
            v_floor: 0.1,
            lookahead: 1.0,
            contact_radius: 2.0,
            ttc_model: TtcModel::PathContact,
            ttc_horizon: 8.0,
            safety_radius: 4.0,
        }
    }
}

impl PayoffParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta", self.beta),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k", self.k),
            ("d_decay", self.d_decay),
            ("ttc_decay", self.ttc_decay),
            ("ttc_min", self.ttc_min),
            ("v_floor", self.v_floor),
            ("lookahead", self.lookahead),
            ("ttc_horizon", self.ttc_horizon),
            ("safety_radius", self.safety_radius),
        ];
        if !(self.contact_radius >= 0.0) || !self.contact_radius.is_finite() {
            return Err(Error::InvalidParameter("contact_radius must be finite and non-negative".into()));
        }
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.ttc_crit > self.ttc_min) {
            return Err(Error::InvalidParameter("ttc_crit must exceed ttc_min".into()));
        }
        if !(self.a_min < 0.0 && 0.0 < self.a_max) {
            return Err(Error::InvalidParameter("need a_min < 0 < a_max".into()));
        }
        if !(0.0 < self.v_threshold && self.v_threshold < self.v_max) {
            return Err(Error::InvalidParameter("need 0 < v_threshold < v_max".into()));
        }
        Ok(())
    }
}

/// How the three payoff weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// Constant weights; must sum to one.
    Fixed { safety: f64, efficiency: f64, comfort: f64 },
    /// Safety weight driven by TTC, remainder split evenly.
    Adaptive,
}

impl WeightMode {
    pub fn weights(&self, ttc: f64, p: &PayoffParams) -> (f64, f64, f64) {
        match *self {
            WeightMode::Fixed {
                safety,
                efficiency,
                comfort,
            } => (safety, efficiency, comfort),
            WeightMode::Adaptive => {
                let w_s = adaptive_safety_weight(ttc, p);
                let (w_e, w_c) = split_weights(w_s);
                (w_s, w_e, w_c)
            }
        }
    }
}

/// Payoff terms of one vehicle together with the weights in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub f_s: f64,
    pub f_e: f64,
    pub f_c: f64,
    pub w_s: f64,
    pub w_e: f64,
    pub w_c: f64,
    pub total: f64,
    /// TTC the weights were computed from.
    pub ttc: f64,
}

impl PayoffBreakdown {
    pub fn combine(f_s: f64, f_e: f64, f_c: f64, weights: (f64, f64, f64), ttc: f64) -> Self {
        let (w_s, w_e, w_c) = weights;
        PayoffBreakdown {
            f_s,
            f_e,
            f_c,
            w_s,
            w_e,
            w_c,
            total: w_s * f_s + w_e * f_e + w_c * f_c,
            ttc,
        }
    }
}

/// `exp(-beta * |pos - center|)`.
pub fn distance_decay(pos: Vec2, center: Vec2, beta: f64) -> f64 {
    exp(-beta * euclidean_distance(pos, center))
}

pub fn safety_payoff(next_speed: f64, next_pos: Vec2, ttc: f64, p: &PayoffParams, center: Vec2) -> f64 {
    if next_speed <= p.v_threshold {
        distance_decay(next_pos, center, p.beta)
    } else if ttc == f64::INFINITY {
        1.0
    } else {
        (1.0 - exp(-p.k1 * (ttc - p.ttc_min))).max(0.0)
    }
}

/// `exp(-k2 (t_remaining - t_min) / t_min)`.
pub fn efficiency_payoff(t_remaining: f64, t_min: f64, k2: f64) -> f64 {
    let excess = (t_remaining - t_min).max(0.0);
    exp(-k2 * excess / t_min)
}

/// Efficiency payoff for covering `remaining` metres at `next_speed`.
pub fn efficiency_for_speed(remaining: f64, next_speed: f64, p: &PayoffParams) -> f64 {
    if !(remaining > 0.0) {
        return 1.0;
    }
    let v = next_speed.min(p.v_max).max(p.v_floor);
    efficiency_payoff(remaining / v, remaining / p.v_max, p.k2)
}

pub fn comfort_payoff(a_prev: f64, a_cand: f64, p: &PayoffParams) -> f64 {
    (1.0 - p.k3 * (a_cand - a_prev).abs() / (p.a_max - p.a_min)).clamp(0.0, 1.0)
}

/// Safety weight in `[1/3, 1)`, rising as TTC drops below `ttc_crit`.
pub fn adaptive_safety_weight(ttc: f64, p: &PayoffParams) -> f64 {
    if ttc > p.ttc_crit {
        1.0 / 3.0
    } else {
        1.0 / 3.0 + (2.0 / 3.0) * (1.0 - exp(-p.k * (p.ttc_crit / ttc)))
    }
}

/// Splits the non-safety mass evenly: `w_e = w_c = (1 - w_s) / 2`.
pub fn split_weights(w_s: f64) -> (f64, f64) {
    let rest = (1.0 - w_s) / 2.0;
    (rest, rest)
}

/// Samples per lookahead used to detect a predicted contact.
const CONTACT_SAMPLES: usize = 20;

/// Joint prediction of one candidate pair over the lookahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: JointState,
    /// TTC at the predicted state; zero when the vehicles come within
    /// `contact_radius` at any point of the lookahead.
    pub ttc: f64,
}

/// Sampling period of the path-contact TTC, s.
const PATH_TTC_STEP: f64 = 0.05;

pub fn predict_outcome(scene: &Scene, s: &JointState, a_ego: f64, a_target: f64, p: &PayoffParams) -> Outcome {
    let next = scene.predict(s, a_ego, a_target, p.lookahead);
    let contact = scene.closest_approach(s, a_ego, a_target, p.lookahead, CONTACT_SAMPLES) < p.contact_radius;
    let ttc = if contact {
        0.0
    } else {
        match p.ttc_model {
            TtcModel::ClosestApproach => next.ttc(),
            TtcModel::PathContact => scene.path_ttc(&next, p.safety_radius, p.ttc_horizon, PATH_TTC_STEP),
        }
    };
    Outcome { next, ttc }
}

/// Ego payoff of a predicted outcome. `a_prev` and `a_ego` feed the comfort
/// term.
pub fn ego_payoff_of(scene: &Scene, o: &Outcome, a_prev: f64, a_ego: f64, p: &PayoffParams, mode: WeightMode) -> PayoffBreakdown {
    let speed = o.next.ego.speed();
    let f_s = if o.ttc == 0.0 {
        0.0
    } else {
        safety_payoff(speed, o.next.ego.position(), o.ttc, p, scene.center)
    };
    let remaining = scene.ego_exit_s - o.next.ego.s_along;
    let f_e = efficiency_for_speed(remaining, speed, p);
    let f_c = comfort_payoff(a_prev, a_ego, p);
    PayoffBreakdown::combine(f_s, f_e, f_c, mode.weights(o.ttc, p), o.ttc)
}

/// Payoff of the ego for the joint candidate `(a_ego, a_target)`.
pub fn ego_payoff(
    scene: &Scene,
    s: &JointState,
    a_ego: f64,
    a_target: f64,
    p: &PayoffParams,
    mode: WeightMode,
) -> PayoffBreakdown {
    let o = predict_outcome(scene, s, a_ego, a_target, p);
    ego_payoff_of(scene, &o, s.ego.a_next, a_ego, p, mode)
}

/// Ego payoff with the target extrapolated at its current acceleration.
pub fn total_payoff_ego(scene: &Scene, s: &JointState, a_cand: f64, p: &PayoffParams, mode: WeightMode) -> PayoffBreakdown {
    ego_payoff(scene, s, a_cand, s.target.a_next, p, mode)
}

/// Safety term of a malicious vehicle: grows as it closes in on the other
/// vehicle while TTC stays positive.
pub fn malicious_safety(distance: f64, ttc: f64, p: &PayoffParams) -> f64 {
    let ttc_factor = if ttc == f64::INFINITY {
        1.0
    } else {
        1.0 - exp(-ttc / p.ttc_decay)
    };
    exp(-distance / p.d_decay) * ttc_factor
}

/// `v / v_max`, saturating at 1 for speeding vehicles.
pub fn malicious_efficiency(next_speed: f64, p: &PayoffParams) -> f64 {
    (next_speed / p.v_max).clamp(0.0, 1.0)
}

/// Malicious payoff of a predicted outcome.
pub fn malicious_payoff_of(o: &Outcome, p: &PayoffParams, mode: WeightMode) -> PayoffBreakdown {
    let f_s = malicious_safety(o.next.distance(), o.ttc, p);
    let f_e = malicious_efficiency(o.next.target.speed(), p);
    PayoffBreakdown::combine(f_s, f_e, 0.0, mode.weights(o.ttc, p), o.ttc)
}

/// Payoff of a malicious target for the joint candidate `(a_ego, a_target)`.
pub fn malicious_payoff(
    scene: &Scene,
    s: &JointState,
    a_ego: f64,
    a_target: f64,
    p: &PayoffParams,
    mode: WeightMode,
) -> PayoffBreakdown {
    malicious_payoff_of(&predict_outcome(scene, s, a_ego, a_target, p), p, mode)
}

/// Malicious target payoff with the ego extrapolated at its current
/// acceleration.
pub fn total_payoff_malicious(
    scene: &Scene,
    s: &JointState,
    a_cand: f64,
    p: &PayoffParams,
    mode: WeightMode,
) -> PayoffBreakdown {
    malicious_payoff(scene, s, s.ego.a_next, a_cand, p, mode)
}
