//! Closed-loop episode: observe the joint state, let the ego decide, let the
//! target act, advance both vehicles, record, repeat.

use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenarios::BehaviorPolicy;
use crate::geometry::{Path, Vec2};
use crate::vehicle::VehicleState;
use crate::world::{JointState, Scene};

/// Number of sub-samples used to look for contact between decision steps.
const CONTACT_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Intersection,
    Roundabout,
}

/// Path and initial condition of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub path: Path,
    /// Initial arc length along the path, m.
    pub start_s: f64,
    /// Initial speed, m/s.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: GeometryKind,
    pub center: Vec2,
    pub lane_width: f64,
    pub ego: VehicleSpec,
    /// `None` runs the ego alone.
    pub target: Option<VehicleSpec>,
    /// Arc length at which the ego has left the intersection region, m.
    pub ego_exit_s: f64,
    /// Legal maximum speed, m/s.
    pub v_max: f64,
    /// Decision period, s.
    pub dt: f64,
    /// Episode horizon, s.
    pub horizon: f64,
    /// Centre-to-centre distance counted as a collision, m.
    pub collision_radius: f64,
    /// How the target drives.
    pub target_policy: BehaviorPolicy,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be positive");
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("horizon must be positive and finite");
        }
        if !(self.collision_radius >= 0.0) {
            return bad("collision_radius must be non-negative");
        }
        for spec in core::iter::once(&self.ego).chain(self.target.as_ref()) {
            if !(spec.speed >= 0.0) || !spec.speed.is_finite() {
                return bad("initial speeds must be finite and non-negative");
            }
            if !(0.0..=spec.path.length()).contains(&spec.start_s) {
                return bad("start position lies outside its path");
            }
        }
        Ok(())
    }

    /// Static geometry of the episode. Without a target the ego path stands
    /// in for the (already exited) target's path.
    pub fn scene(&self) -> Scene {
        match &self.target {
            Some(t) => Scene::new(t.path.clone(), self.ego.path.clone(), self.center, self.ego_exit_s),
            None => Scene {
                target_path: self.ego.path.clone(),
                ego_path: self.ego.path.clone(),
                center: self.center,
                conflict: None,
                ego_exit_s: self.ego_exit_s,
            },
        }
    }

    pub fn initial_state(&self) -> JointState {
        let ego = VehicleState::on_path(&self.ego.path, self.ego.start_s, self.ego.speed);
        let target = match &self.target {
            Some(t) => VehicleState::on_path(&t.path, t.start_s, t.speed),
            None => VehicleState {
                exited: true,
                ..VehicleState::on_path(&self.ego.path, self.ego.path.length(), 0.0)
            },
        };
        JointState { target, ego, t: 0.0 }
    }

    pub fn steps(&self) -> usize {
        let n = self.horizon / self.dt;
        let rounded = libm::round(n);
        if (n - rounded).abs() < 1e-9 {
            rounded as usize
        } else {
            libm::ceil(n) as usize
        }
    }
}

/// Decision-time quantities recorded in the trace. Fields are NaN when the
/// decider does not compute them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub w_s: f64,
    pub r_tom: f64,
    pub r_game: f64,
    pub r_total: f64,
    pub p_malice: f64,
    pub nash_distance: f64,
    pub nash_fallback: bool,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            w_s: f64::NAN,
            r_tom: f64::NAN,
            r_game: f64::NAN,
            r_total: f64::NAN,
            p_malice: f64::NAN,
            nash_distance: f64::NAN,
            nash_fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub accel: f64,
    /// Index into the decider's action set, when it has one.
    pub action: Option<usize>,
    pub diagnostics: Diagnostics,
}

/// Chooses the ego's acceleration each decision period.
pub trait EgoDecider {
    fn reset(&mut self) {}

    fn decide(&mut self, scene: &Scene, s: &JointState, rng: &mut dyn RngCore) -> Result<Decision>;
}

/// Chooses the target's acceleration each decision period.
pub trait TargetPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, scene: &Scene, s: &JointState, rng: &mut dyn RngCore) -> f64;
}

/// Holds a fixed acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAccel(pub f64);

impl EgoDecider for ConstantAccel {
    fn decide(&mut self, _: &Scene, _: &JointState, _: &mut dyn RngCore) -> Result<Decision> {
        Ok(Decision {
            accel: self.0,
            action: None,
            diagnostics: Diagnostics::default(),
        })
    }
}

impl TargetPolicy for ConstantAccel {
    fn act(&mut self, _: &Scene, _: &JointState, _: &mut dyn RngCore) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BothExited,
    Collision,
    Horizon,
}

/// One recorded decision step (or the final state, whose accelerations are
/// zero and diagnostics NaN).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub target: VehicleState,
    pub ego: VehicleState,
    /// Acceleration applied by the target from `t` to `t + dt`.
    pub a_target: f64,
    /// Acceleration applied by the ego from `t` to `t + dt`.
    pub a_ego: f64,
    pub ttc: f64,
    /// Inter-vehicle distance at `t`; infinite once either vehicle exited.
    pub dist: f64,
    /// Smallest distance reached during the step that follows `t`.
    pub min_dist_step: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    pub collision: bool,
    pub has_target: bool,
}

impl Trace {
    pub fn final_state(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Smallest inter-vehicle distance over the whole episode.
    pub fn min_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.min_dist_step.min(r.dist)).fold(f64::INFINITY, f64::min)
    }
}

fn active_distance(s: &JointState) -> f64 {
    if s.both_active() {
        s.distance()
    } else {
        f64::INFINITY
    }
}

/// Mutable simulation state shared by evaluation and training loops.
#[derive(Debug, Clone)]
pub struct World {
    pub scene: Scene,
    pub state: JointState,
    pub dt: f64,
    pub collision_radius: f64,
    step_index: usize,
    max_steps: usize,
    collided: bool,
}

/// Result of one [`World::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub previous: JointState,
    pub min_dist: f64,
    pub collision: bool,
    /// Episode over after this step (collision, both exited or horizon).
    pub done: bool,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(World {
            scene: cfg.scene(),
            state: cfg.initial_state(),
            dt: cfg.dt,
            collision_radius: cfg.collision_radius,
            step_index: 0,
            max_steps: cfg.steps(),
            collided: false,
        })
    }

    pub fn is_done(&self) -> bool {
        self.collided || (self.state.ego.exited && self.state.target.exited) || self.step_index >= self.max_steps
    }

    pub fn termination(&self) -> Termination {
        if self.collided {
            Termination::Collision
        } else if self.state.ego.exited && self.state.target.exited {
            Termination::BothExited
        } else {
            Termination::Horizon
        }
    }

    /// Applies both accelerations for one decision period.
    pub fn advance(&mut self, a_ego: f64, a_target: f64) -> Result<StepOutcome> {
        let previous = self.state;
        let min_dist = self.scene.closest_approach(&previous, a_ego, a_target, self.dt, CONTACT_SUBSTEPS);
        let ego = crate::vehicle::step_vehicle(&previous.ego, &self.scene.ego_path, a_ego, self.dt)?;
        let target = crate::vehicle::step_vehicle(&previous.target, &self.scene.target_path, a_target, self.dt)?;
        self.step_index += 1;
        self.state = JointState {
            target,
            ego,
            t: self.step_index as f64 * self.dt,
        };
        let collision = min_dist < self.collision_radius;
        self.collided |= collision;
        Ok(StepOutcome {
            previous,
            min_dist,
            collision,
            done: self.is_done(),
        })
    }
}

fn row(s: &JointState, a_ego: f64, a_target: f64, min_dist: f64, diagnostics: Diagnostics) -> TraceRow {
    TraceRow {
        t: s.t,
        target: s.target,
        ego: s.ego,
        a_target,
        a_ego,
        ttc: s.ttc(),
        dist: active_distance(s),
        min_dist_step: min_dist,
        diagnostics,
    }
}

/// Runs one episode to completion and returns its trace.
pub fn run_episode(
    cfg: &ScenarioConfig,
    decider: &mut dyn EgoDecider,
    target: &mut dyn TargetPolicy,
    rng: &mut dyn RngCore,
) -> Result<Trace> {
    let mut world = World::new(cfg)?;
    decider.reset();
    target.reset();
    let mut rows = Vec::with_capacity(cfg.steps() + 1);
    if world.state.both_active() && world.state.distance() < cfg.collision_radius {
        world.collided = true;
    }
    while !world.is_done() {
        let s = world.state;
        let decision = if s.ego.exited {
            Decision {
                accel: 0.0,
                action: None,
                diagnostics: Diagnostics::default(),
            }
        } else {
            decider.decide(&world.scene, &s, rng)?
        };
        let a_target = if s.target.exited {
            0.0
        } else {
            target.act(&world.scene, &s, rng)
        };
        let out = world.advance(decision.accel, a_target)?;
        rows.push(row(&s, decision.accel, a_target, out.min_dist, decision.diagnostics));
    }
    let last = world.state;
    rows.push(row(&last, 0.0, 0.0, active_distance(&last), Diagnostics::default()));
    Ok(Trace {
        dt: cfg.dt,
        rows,
        termination: world.termination(),
        collision: world.collided,
        has_target: cfg.target.is_some(),
    })
}
