//! The composed ego decider: payoff matrix, Nash-proximity reward, malice
//! inference and the learned Q-table, in the ablation stack selected by a
//! [`DeciderConfig`].

use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::episode::{Decision, Diagnostics, EgoDecider};
use crate::error::{Error, Result};
use crate::game::{build_matrix, find_pure_nash, game_reward, nearest_nash, NashResult};
use crate::payoff::{PayoffParams, WeightMode};
use crate::qlearn::{acceleration_preference, discretize, greedy, total_reward, BinEdges, QTable};
use crate::tom::{infer_malice, tom_reward, BeliefNetwork, ObservationThresholds, TargetObserver};
use crate::world::{JointState, Scene};

/// Default acceleration grid, m/s^2.
pub fn default_actions() -> Vec<f64> {
    (-5..=3).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeciderConfig {
    pub ego_actions: Vec<f64>,
    pub target_actions: Vec<f64>,
    pub payoff: PayoffParams,
    /// Weighting used by both sides of the payoff matrix.
    pub weights: WeightMode,
    /// Include the ToM reward. Without it the step reward is the game
    /// reward alone.
    pub use_tom: bool,
    /// ToM reward weight (W1).
    pub w1: f64,
    /// Game reward weight (W2).
    pub w2: f64,
    /// Sensitivity of the game reward to the distance from equilibrium.
    pub delta: f64,
    /// Sensitivity of the ToM reward.
    pub epsilon_mod: f64,
    pub thresholds: ObservationThresholds,
    pub bins: BinEdges,
    /// Scale of the learned advantage added to the step reward when
    /// scoring; `1 - gamma` expresses Q in per-step reward units.
    pub q_weight: f64,
}

impl Default for DeciderConfig {
    fn default() -> Self {
        DeciderConfig {
            ego_actions: default_actions(),
            target_actions: default_actions(),
            payoff: PayoffParams::default(),
            weights: WeightMode::Adaptive,
            use_tom: true,
            w1: 0.5,
            w2: 0.5,
            delta: 1.0,
            epsilon_mod: 1.0,
            thresholds: ObservationThresholds::default(),
            bins: BinEdges::default(),
            q_weight: 0.05,
        }
    }
}

impl DeciderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        self.payoff.validate()?;
        self.bins.validate()?;
        for actions in [&self.ego_actions, &self.target_actions] {
            if actions.is_empty() {
                return bad("action sets must not be empty");
            }
            if actions.iter().any(|a| !(*a >= self.payoff.a_min && *a <= self.payoff.a_max)) {
                return bad("actions must lie in [a_min, a_max]");
            }
        }
        if !(self.delta > 0.0) || !(self.epsilon_mod > 0.0) {
            return bad("delta and epsilon_mod must be positive");
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return bad("w1 and w2 must be non-negative and sum to 1");
        }
        if !(self.q_weight >= 0.0) || !self.q_weight.is_finite() {
            return bad("q_weight must be finite and non-negative");
        }
        if let WeightMode::Fixed {
            safety,
            efficiency,
            comfort,
        } = self.weights
        {
            if [safety, efficiency, comfort].iter().any(|w| !(*w >= 0.0)) || (safety + efficiency + comfort - 1.0).abs() > 1e-9 {
                return bad("fixed weights must be non-negative and sum to 1");
            }
        }
        Ok(())
    }

    /// Effective `(W1, W2)`; the game reward carries everything without ToM.
    pub fn reward_weights(&self) -> (f64, f64) {
        if self.use_tom {
            (self.w1, self.w2)
        } else {
            (0.0, 1.0)
        }
    }
}

/// Step rewards of every ego action in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRewards {
    pub r_tom: Vec<f64>,
    pub r_game: Vec<f64>,
    pub total: Vec<f64>,
    pub nash: Vec<NashResult>,
    /// Safety weight in force at the current state.
    pub w_s: f64,
}

/// True when holding `a` over the payoff lookahead would take the ego above
/// the legal speed limit.
pub fn exceeds_limit(cfg: &DeciderConfig, s: &JointState, a: f64) -> bool {
    a > 0.0 && s.ego.speed() + a * cfg.payoff.lookahead > cfg.payoff.v_max + 1e-9
}

/// Rewards of all ego actions given the current malice belief.
///
/// The payoff matrix is built once; each candidate is then compared with the
/// equilibrium nearest to `(candidate, target's last acceleration)`. Actions
/// that would break the speed limit earn nothing.
pub fn step_rewards(cfg: &DeciderConfig, scene: &Scene, s: &JointState, p_malice: f64) -> StepRewards {
    let m = build_matrix(scene, s, &cfg.ego_actions, &cfg.target_actions, &cfg.payoff, cfg.weights, cfg.weights);
    let equilibria = find_pure_nash(&m);
    let (w1, w2) = cfg.reward_weights();
    let n = cfg.ego_actions.len();
    let mut out = StepRewards {
        r_tom: Vec::with_capacity(n),
        r_game: Vec::with_capacity(n),
        total: Vec::with_capacity(n),
        nash: Vec::with_capacity(n),
        w_s: cfg.weights.weights(s.ttc(), &cfg.payoff).0,
    };
    for &a in &cfg.ego_actions {
        let nash = nearest_nash(&m, &equilibria, (a, s.target.a_next));
        let r_game = game_reward(nash.distance, cfg.delta);
        let r_tom = if cfg.use_tom {
            // braking at rest changes nothing, so it earns no caution credit
            let effective = if s.ego.speed() == 0.0 { a.max(0.0) } else { a };
            tom_reward(effective, p_malice, cfg.epsilon_mod)
        } else {
            f64::NAN
        };
        let total = if exceeds_limit(cfg, s, a) {
            0.0
        } else if cfg.use_tom {
            total_reward(r_tom, r_game, w1, w2)
        } else {
            r_game
        };
        out.r_tom.push(r_tom);
        out.r_game.push(r_game);
        out.total.push(total);
        out.nash.push(nash);
    }
    out
}

/// Running malice belief about the target over one episode.
#[derive(Debug, Clone)]
pub struct MaliceTracker {
    observer: TargetObserver,
    last: f64,
}

impl MaliceTracker {
    pub fn new(network: &BeliefNetwork) -> Self {
        MaliceTracker {
            observer: TargetObserver::new(),
            last: network_prior(network),
        }
    }

    pub fn reset(&mut self, network: &BeliefNetwork) {
        *self = Self::new(network);
    }

    /// Updates the belief with the target's current state. A target that
    /// has exited poses no threat and reads as zero.
    pub fn update(&mut self, cfg: &DeciderConfig, network: &BeliefNetwork, scene: &Scene, s: &JointState) -> Result<f64> {
        if s.target.exited {
            self.last = 0.0;
        } else {
            let obs = self.observer.observe(
                &cfg.thresholds,
                s.target.speed(),
                s.target.a_next,
                scene.target_to_conflict(&s.target),
            );
            self.last = infer_malice(network, &obs)?;
        }
        Ok(self.last)
    }
}

fn network_prior(network: &BeliefNetwork) -> f64 {
    network
        .nodes()
        .first()
        .and_then(|n| n.cpt.get(crate::tom::malice::IS_MALICIOUS).copied())
        .unwrap_or(0.5)
}

/// The ASEQ ego: scores every action by its step reward plus the scaled
/// learned value `Q(s, a)` and takes the best one.
#[derive(Debug, Clone)]
pub struct AseqDecider<'a> {
    cfg: DeciderConfig,
    network: BeliefNetwork,
    q: Option<&'a QTable>,
    tracker: MaliceTracker,
    preference: Vec<usize>,
}

impl<'a> AseqDecider<'a> {
    pub fn new(cfg: DeciderConfig, network: BeliefNetwork, q: Option<&'a QTable>) -> Result<Self> {
        cfg.validate()?;
        if let Some(q) = q {
            if q.n_actions() != cfg.ego_actions.len() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "Q-table has {} actions, the decider {}",
                    q.n_actions(),
                    cfg.ego_actions.len()
                )));
            }
        }
        let tracker = MaliceTracker::new(&network);
        let preference = acceleration_preference(&cfg.ego_actions);
        Ok(AseqDecider {
            cfg,
            network,
            q,
            tracker,
            preference,
        })
    }

    pub fn config(&self) -> &DeciderConfig {
        &self.cfg
    }

    /// Scores used for the greedy choice, one per ego action.
    pub fn scores(&self, scene: &Scene, s: &JointState, rewards: &StepRewards) -> Vec<f64> {
        let q_row = self.q.map(|q| q.advantage(&discretize(s, scene, &self.cfg.bins)));
        rewards
            .total
            .iter()
            .enumerate()
            .map(|(i, r)| r + q_row.as_ref().map_or(0.0, |row| self.cfg.q_weight * row[i]))
            .collect()
    }
}

impl EgoDecider for AseqDecider<'_> {
    fn reset(&mut self) {
        self.tracker.reset(&self.network);
    }

    fn decide(&mut self, scene: &Scene, s: &JointState, _rng: &mut dyn RngCore) -> Result<Decision> {
        let p_malice = if self.cfg.use_tom {
            self.tracker.update(&self.cfg, &self.network, scene, s)?
        } else {
            f64::NAN
        };
        let rewards = step_rewards(&self.cfg, scene, s, p_malice);
        let scores = self.scores(scene, s, &rewards);
        let i = greedy(&scores, &self.preference);
        Ok(Decision {
            accel: self.cfg.ego_actions[i],
            action: Some(i),
            diagnostics: Diagnostics {
                w_s: rewards.w_s,
                r_tom: rewards.r_tom[i],
                r_game: rewards.r_game[i],
                r_total: rewards.total[i],
                p_malice,
                nash_distance: rewards.nash[i].distance,
                nash_fallback: rewards.nash[i].fallback,
            },
        })
    }
}
