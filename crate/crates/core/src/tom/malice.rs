//! First-order malice inference: discretized observations of the target,
//! the naive-Bayes malice network, CPT fitting and the ToM reward.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::network::{variable_elimination, BeliefNetwork, Node, Variable};
use crate::error::{Error, Result};
use crate::math::sigmoid;

pub const MALICIOUS: usize = 0;
pub const SPEED: usize = 1;
pub const ACCEL: usize = 2;
pub const YIELDING: usize = 3;

/// State index of `Malicious = true`.
pub const IS_MALICIOUS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedBin {
    UnderLimit,
    NearLimit,
    OverLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelBin {
    Braking,
    Coasting,
    Accelerating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YieldBin {
    Yields,
    NoYield,
}

/// Thresholds turning raw kinematics into observation bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationThresholds {
    pub v_max: f64,
    /// Speeds in `(near_fraction * v_max, v_max]` are "near the limit".
    pub near_fraction: f64,
    /// Accelerations below this are braking, m/s^2.
    pub braking: f64,
    /// Accelerations above this are accelerating, m/s^2.
    pub accelerating: f64,
    /// Yielding is judged while the target is within this distance of the
    /// conflict point, m.
    pub yield_radius: f64,
}

impl Default for ObservationThresholds {
    fn default() -> Self {
        ObservationThresholds {
            v_max: 12.0,
            near_fraction: 0.9,
            braking: -0.5,
            accelerating: 0.5,
            yield_radius: 30.0,
        }
    }
}

impl ObservationThresholds {
    pub fn speed_bin(&self, speed: f64) -> SpeedBin {
        if speed > self.v_max {
            SpeedBin::OverLimit
        } else if speed > self.near_fraction * self.v_max {
            SpeedBin::NearLimit
        } else {
            SpeedBin::UnderLimit
        }
    }

    pub fn accel_bin(&self, a: f64) -> AccelBin {
        if a < self.braking {
            AccelBin::Braking
        } else if a > self.accelerating {
            AccelBin::Accelerating
        } else {
            AccelBin::Coasting
        }
    }
}

/// One look at the target. `yielding` is unknown until the target has been
/// observed inside the yield radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub speed: SpeedBin,
    pub accel: AccelBin,
    pub yielding: Option<YieldBin>,
}

impl Observation {
    fn evidence(&self) -> Vec<(usize, usize)> {
        let mut ev = vec![(SPEED, self.speed as usize), (ACCEL, self.accel as usize)];
        if let Some(y) = self.yielding {
            ev.push((YIELDING, y as usize));
        }
        ev
    }
}

/// Running observer of one target over an episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetObserver {
    accel_sum: f64,
    samples: usize,
}

impl TargetObserver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the target's current speed, acceleration and distance to the
    /// conflict point (`None` when the paths do not conflict).
    pub fn observe(&mut self, th: &ObservationThresholds, speed: f64, accel: f64, to_conflict: Option<f64>) -> Observation {
        if let Some(d) = to_conflict {
            if d > 0.0 && d <= th.yield_radius {
                self.accel_sum += accel;
                self.samples += 1;
            }
        }
        let yielding = if self.samples == 0 {
            None
        } else if self.accel_sum / self.samples as f64 >= 0.0 {
            Some(YieldBin::NoYield)
        } else {
            Some(YieldBin::Yields)
        };
        Observation {
            speed: th.speed_bin(speed),
            accel: th.accel_bin(accel),
            yielding,
        }
    }
}

fn malice_variables() -> [Variable; 4] {
    [
        Variable::new("malicious", &["benign", "malicious"]),
        Variable::new("speed", &["under_limit", "near_limit", "over_limit"]),
        Variable::new("accel", &["braking", "coasting", "accelerating"]),
        Variable::new("yielding", &["yields", "no_yield"]),
    ]
}

/// Builds the star network `malicious -> {speed, accel, yielding}`.
///
/// Each CPT argument lists rows for benign then malicious.
pub fn malice_network(prior: f64, speed: [[f64; 3]; 2], accel: [[f64; 3]; 2], yielding: [[f64; 2]; 2]) -> Result<BeliefNetwork> {
    let [m, s, a, y] = malice_variables();
    BeliefNetwork::new(vec![
        Node {
            variable: m,
            parents: vec![],
            cpt: vec![1.0 - prior, prior],
        },
        Node {
            variable: s,
            parents: vec![MALICIOUS],
            cpt: speed.concat(),
        },
        Node {
            variable: a,
            parents: vec![MALICIOUS],
            cpt: accel.concat(),
        },
        Node {
            variable: y,
            parents: vec![MALICIOUS],
            cpt: yielding.concat(),
        },
    ])
}

/// Network used before any fitting: likelihood ratios point the right way,
/// magnitudes are placeholders.
pub fn default_malice_network() -> BeliefNetwork {
    malice_network(
        0.3,
        [[0.45, 0.45, 0.1], [0.15, 0.15, 0.7]],
        [[0.4, 0.4, 0.2], [0.25, 0.25, 0.5]],
        [[0.85, 0.15], [0.2, 0.8]],
    )
    .expect("default CPTs are normalized")
}

/// True when `bn` has the malice network's variables in the expected order.
pub fn is_malice_network(bn: &BeliefNetwork) -> bool {
    let expected = malice_variables();
    bn.len() == expected.len()
        && bn
            .nodes()
            .iter()
            .zip(expected.iter())
            .all(|(n, v)| n.variable == *v && (n.variable.name == "malicious" || n.parents == [MALICIOUS]))
}

/// `P(malicious | observation)`.
pub fn infer_malice(bn: &BeliefNetwork, obs: &Observation) -> Result<f64> {
    if !is_malice_network(bn) {
        return Err(Error::InvalidNetwork("not a malice network".into()));
    }
    let post = variable_elimination(bn, MALICIOUS, &obs.evidence())?;
    Ok(post[IS_MALICIOUS])
}

/// `sigmoid(-epsilon_mod * a_cand * p_malice)`: accelerating toward a likely
/// malicious target is discouraged, braking is encouraged.
pub fn tom_reward(a_cand: f64, p_malice: f64, epsilon_mod: f64) -> f64 {
    sigmoid(-epsilon_mod * a_cand * p_malice)
}

/// Observations from one episode with its ground-truth label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEpisode {
    pub malicious: bool,
    pub observations: Vec<Observation>,
}

/// Laplace-smoothed (+1) maximum-likelihood CPTs.
///
/// The prior counts episodes; the feature CPTs count per-step
/// observations, skipping steps where yielding was not yet observable.
pub fn fit_cpts(corpus: &[LabeledEpisode]) -> Result<BeliefNetwork> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = corpus.len() as f64;
    let n_mal = corpus.iter().filter(|e| e.malicious).count() as f64;
    let prior = (n_mal + 1.0) / (n + 2.0);

    let mut speed = [[1.0f64; 3]; 2];
    let mut accel = [[1.0f64; 3]; 2];
    let mut yielding = [[1.0f64; 2]; 2];
    for ep in corpus {
        let row = ep.malicious as usize;
        for obs in &ep.observations {
            speed[row][obs.speed as usize] += 1.0;
            accel[row][obs.accel as usize] += 1.0;
            if let Some(y) = obs.yielding {
                yielding[row][y as usize] += 1.0;
            }
        }
    }
    fn normalize<const K: usize>(rows: &mut [[f64; K]; 2]) {
        for row in rows.iter_mut() {
            let z: f64 = row.iter().sum();
            for x in row.iter_mut() {
                *x /= z;
            }
        }
    }
    normalize(&mut speed);
    normalize(&mut accel);
    normalize(&mut yielding);
    malice_network(prior, speed, accel, yielding)
}
