//! Q-learning on randomized intersection (or roundabout) episodes against a
//! mix of malicious and benign targets, and the labeled corpus used to fit
//! the malice network.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{step_rewards, DeciderConfig, MaliceTracker};
use crate::episode::{run_episode, ConstantAccel, GeometryKind, ScenarioConfig, TargetPolicy, World};
use crate::error::{Error, Result};
use crate::qlearn::{acceleration_preference, discretize, train_env, DiscreteStateKey, Environment, LearnerParams, LearningCurve, QTable, Transition};
use crate::scenarios::{
    intersection_scenario, roundabout_scenario, target_actions, BehaviorPolicy, IntersectionLayout, IntersectionStart, PolicyRunner,
    RoundaboutLayout,
};
use crate::tom::{BeliefNetwork, LabeledEpisode, TargetObserver};

/// Ranges the training episodes are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSampler {
    pub geometry: GeometryKind,
    pub ego_speed: (f64, f64),
    pub target_speed: (f64, f64),
    /// Target arrival at the conflict point minus the ego's, s.
    pub arrival_gap: (f64, f64),
    /// Ego start distance south of the centre (intersection only), m.
    pub ego_offset: (f64, f64),
    /// Probability that the target is malicious.
    pub p_malicious: f64,
    /// Speed cap of payoff-driven malicious targets, m/s.
    pub malicious_speed_cap: f64,
}

impl Default for EpisodeSampler {
    fn default() -> Self {
        EpisodeSampler {
            geometry: GeometryKind::Intersection,
            ego_speed: (8.0, 12.0),
            target_speed: (10.0, 18.0),
            arrival_gap: (-1.0, 1.0),
            ego_offset: (45.0, 60.0),
            p_malicious: 0.5,
            malicious_speed_cap: 18.0,
        }
    }
}

impl EpisodeSampler {
    pub fn roundabout() -> Self {
        EpisodeSampler {
            geometry: GeometryKind::Roundabout,
            ego_speed: (6.0, 10.0),
            target_speed: (6.0, 10.0),
            malicious_speed_cap: 12.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.ego_speed, self.target_speed, self.arrival_gap, self.ego_offset] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter("sampler ranges must be finite with lo <= hi".into()));
            }
        }
        if self.ego_speed.0 < 0.0 || self.target_speed.0 < 0.0 {
            return Err(Error::InvalidParameter("sampled speeds must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.p_malicious) {
            return Err(Error::InvalidParameter("p_malicious must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn draw(rng: &mut dyn RngCore, (lo, hi): (f64, f64)) -> f64 {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    }

    /// Draws one scenario.
    pub fn sample(&self, rng: &mut dyn RngCore) -> ScenarioConfig {
        let ego_speed = Self::draw(rng, self.ego_speed);
        let target_speed = Self::draw(rng, self.target_speed);
        let gap = Self::draw(rng, self.arrival_gap);
        let offset = Self::draw(rng, self.ego_offset);
        let malicious = rng.random::<f64>() < self.p_malicious;
        let policy = if malicious {
            BehaviorPolicy::PayoffDriven {
                speed_cap: self.malicious_speed_cap.max(target_speed),
            }
        } else {
            BehaviorPolicy::yielding(target_speed)
        };
        match self.geometry {
            GeometryKind::Intersection => intersection_scenario(
                &IntersectionLayout::default(),
                IntersectionStart {
                    ego_speed,
                    target_speed,
                    ego_offset: offset,
                    arrival_gap: gap,
                },
                policy,
            ),
            GeometryKind::Roundabout => roundabout_scenario(&RoundaboutLayout::default(), ego_speed, target_speed, gap, policy),
        }
    }
}

/// Closed-loop environment seen by the learner. An episode ends when the
/// ego exits, on collision, or at the horizon.
///
/// The step reward is the decider's shaped reward. A collision replaces it
/// with the collision penalty. Exiting adds `gamma / (1 - gamma)`, the
/// discounted value of earning the maximal step reward forever, so that
/// finishing the crossing is never worth less than lingering in it.
pub struct DrivingEnv {
    decider: DeciderConfig,
    network: BeliefNetwork,
    sampler: EpisodeSampler,
    collision_penalty: f64,
    gamma: f64,
    world: Option<World>,
    target: Option<PolicyRunner>,
    tracker: MaliceTracker,
    preference: Vec<usize>,
}

impl DrivingEnv {
    pub fn new(decider: DeciderConfig, network: BeliefNetwork, sampler: EpisodeSampler, params: &LearnerParams) -> Result<Self> {
        decider.validate()?;
        params.validate()?;
        sampler.validate()?;
        let tracker = MaliceTracker::new(&network);
        let preference = acceleration_preference(&decider.ego_actions);
        Ok(DrivingEnv {
            decider,
            network,
            sampler,
            collision_penalty: params.collision_penalty,
            gamma: params.gamma,
            world: None,
            target: None,
            tracker,
            preference,
        })
    }

    fn key(&self, world: &World) -> DiscreteStateKey {
        discretize(&world.state, &world.scene, &self.decider.bins)
    }
}

impl Environment for DrivingEnv {
    type State = DiscreteStateKey;

    fn n_actions(&self) -> usize {
        self.decider.ego_actions.len()
    }

    fn preference(&self) -> Vec<usize> {
        self.preference.clone()
    }

    fn reset(&mut self, _episode: usize, rng: &mut dyn RngCore) -> DiscreteStateKey {
        let cfg = self.sampler.sample(rng);
        let world = World::new(&cfg).expect("sampled scenarios are valid");
        self.target = Some(cfg.target_policy.instantiate(self.decider.payoff, &target_actions()));
        self.tracker.reset(&self.network);
        let key = self.key(&world);
        self.world = Some(world);
        key
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<Transition<DiscreteStateKey>> {
        let world = self.world.as_mut().expect("reset before step");
        let target = self.target.as_mut().expect("reset before step");
        let s = world.state;
        let p_malice = self.tracker.update(&self.decider, &self.network, &world.scene, &s)?;
        let rewards = step_rewards(&self.decider, &world.scene, &s, p_malice);
        let a_target = if s.target.exited { 0.0 } else { target.act(&world.scene, &s, rng) };
        let out = world.advance(self.decider.ego_actions[action], a_target)?;
        if out.collision {
            return Ok(Transition {
                reward: self.collision_penalty,
                next: None,
            });
        }
        let mut reward = rewards.total[action];
        if world.state.ego.exited {
            // Crossing leads to open road: the maximal step reward from then on.
            reward += self.gamma / (1.0 - self.gamma);
            return Ok(Transition { reward, next: None });
        }
        let next = if out.done { None } else { Some(discretize(&world.state, &world.scene, &self.decider.bins)) };
        Ok(Transition { reward, next })
    }
}

/// Trains a table from scratch (or continues `initial`) with a seeded RNG.
pub fn train(
    decider: &DeciderConfig,
    network: &BeliefNetwork,
    sampler: EpisodeSampler,
    params: &LearnerParams,
    seed: u64,
    initial: Option<QTable>,
) -> Result<(QTable, LearningCurve)> {
    let mut env = DrivingEnv::new(decider.clone(), network.clone(), sampler, params)?;
    let mut q = initial.unwrap_or_else(|| QTable::new(decider.ego_actions.len()));
    if q.n_actions() != decider.ego_actions.len() {
        return Err(Error::InvalidParameter("initial table does not match the action set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let curve = train_env(&mut env, &mut q, params, &mut rng)?;
    Ok((q, curve))
}

/// Runs `episodes` scripted episodes (half malicious, half benign) and
/// records what an observer sees of the target each step.
///
/// The ego holds its speed so that the target's behavior alone separates
/// the labels.
pub fn collect_corpus(sampler: &EpisodeSampler, decider: &DeciderConfig, episodes: usize, seed: u64) -> Result<Vec<LabeledEpisode>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut cfg = sampler.sample(&mut rng);
        let malicious = i % 2 == 0;
        let speed = cfg.target.as_ref().map_or(0.0, |t| t.speed);
        cfg.target_policy = match (malicious, i % 4) {
            (true, 0) => BehaviorPolicy::Scripted { accel: 0.0 },
            (true, _) => BehaviorPolicy::PayoffDriven {
                speed_cap: sampler.malicious_speed_cap.max(speed),
            },
            (false, _) => BehaviorPolicy::yielding(speed),
        };
        let mut target = cfg.target_policy.instantiate(decider.payoff, &target_actions());
        let trace = run_episode(&cfg, &mut ConstantAccel(0.0), &mut target, &mut rng)?;
        let scene = cfg.scene();
        let mut observer = TargetObserver::new();
        let observations = trace
            .rows
            .iter()
            .filter(|r| !r.target.exited)
            .map(|r| {
                // the row's acceleration is the one applied over the next step
                observer.observe(&decider.thresholds, r.target.speed(), r.a_target, scene.target_to_conflict(&r.target))
            })
            .collect();
        out.push(LabeledEpisode { malicious, observations });
    }
    Ok(out)
}
