//! Tabular Q-learning: state discretization, the Q-table, epsilon-greedy
//! selection and a generic episodic training loop.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{JointState, Scene};

/// Upper bin edges. A value `x` falls in the first bin whose edge exceeds
/// it; values at or above the last edge land in the top bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinEdges {
    pub distance: Vec<f64>,
    pub speed: Vec<f64>,
    pub ttc: Vec<f64>,
}

impl Default for BinEdges {
    fn default() -> Self {
        BinEdges {
            distance: vec![5.0, 15.0, 30.0, 60.0],
            speed: vec![2.0, 6.0, 10.0, 13.0],
            ttc: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

impl BinEdges {
    pub fn validate(&self) -> Result<()> {
        for (name, edges) in [("distance", &self.distance), ("speed", &self.speed), ("ttc", &self.ttc)] {
            if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "{name} bin edges must be finite and strictly increasing"
                )));
            }
        }
        Ok(())
    }

    /// Sentinel distance bin for exited vehicles.
    pub fn exited_bin(&self) -> u8 {
        self.distance.len() as u8 + 1
    }
}

fn bin(edges: &[f64], x: f64) -> u8 {
    edges.iter().position(|&e| x < e).unwrap_or(edges.len()) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DiscreteStateKey {
    pub ego_dist: u8,
    pub target_dist: u8,
    pub ego_speed: u8,
    pub target_speed: u8,
    pub ttc: u8,
}

/// Maps a continuous joint state to its table key.
///
/// Distances are measured along each path to the conflict point (zero once
/// passed); with no conflict they fall in the top regular bin.
pub fn discretize(s: &JointState, scene: &Scene, edges: &BinEdges) -> DiscreteStateKey {
    let dist_bin = |exited: bool, d: Option<f64>| {
        if exited {
            edges.exited_bin()
        } else {
            bin(&edges.distance, d.unwrap_or(f64::INFINITY))
        }
    };
    DiscreteStateKey {
        ego_dist: dist_bin(s.ego.exited, scene.ego_to_conflict(&s.ego)),
        target_dist: dist_bin(s.target.exited, scene.target_to_conflict(&s.target)),
        ego_speed: bin(&edges.speed, s.ego.speed()),
        target_speed: bin(&edges.speed, s.target.speed()),
        ttc: bin(&edges.ttc, s.ttc()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    /// Multiplicative decay applied after every episode.
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Weight of the ToM reward.
    pub w1: f64,
    /// Weight of the game reward.
    pub w2: f64,
    pub episodes: usize,
    /// Reward replacing the shaped reward on a collision step.
    pub collision_penalty: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            alpha: 0.1,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            epsilon_floor: 0.05,
            w1: 0.5,
            w2: 0.5,
            episodes: 500,
            collision_penalty: -10.0,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in [0, 1)");
        }
        for e in [self.epsilon_start, self.epsilon_floor, self.epsilon_decay] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon start, decay and floor must lie in [0, 1]");
            }
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return bad("reward weights w1, w2 must be non-negative and sum to 1");
        }
        if !self.collision_penalty.is_finite() || self.collision_penalty > 0.0 {
            return bad("collision_penalty must be finite and non-positive");
        }
        Ok(())
    }

    /// Exploration rate used during episode `episode` (0-based).
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let mut eps = self.epsilon_start;
        for _ in 0..episode {
            eps = (eps * self.epsilon_decay).max(self.epsilon_floor);
        }
        eps.max(self.epsilon_floor.min(self.epsilon_start))
    }
}

/// `W1 * r_tom + W2 * r_game`.
pub fn total_reward(r_tom: f64, r_game: f64, w1: f64, w2: f64) -> f64 {
    w1 * r_tom + w2 * r_game
}

/// Action values per state. Unseen states read as all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable<K: Ord = DiscreteStateKey> {
    n_actions: usize,
    values: BTreeMap<K, Vec<f64>>,
    visits: BTreeMap<K, Vec<u32>>,
}

impl<K: Ord + Clone> QTable<K> {
    pub fn new(n_actions: usize) -> Self {
        QTable {
            n_actions,
            values: BTreeMap::new(),
            visits: BTreeMap::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of states with at least one update.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &K, action: usize) -> f64 {
        self.values.get(key).map_or(0.0, |row| row[action])
    }

    pub fn row(&self, key: &K) -> Vec<f64> {
        self.values.get(key).cloned().unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    pub fn visits(&self, key: &K, action: usize) -> u32 {
        self.visits.get(key).map_or(0, |row| row[action])
    }

    /// Each action's value minus the mean over the actions tried in this
    /// state. Untried actions get zero: nothing is known about them, so they
    /// are neither favored nor penalized.
    pub fn advantage(&self, key: &K) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        let (Some(q), Some(n)) = (self.values.get(key), self.visits.get(key)) else {
            return out;
        };
        let tried = n.iter().filter(|&&v| v > 0).count();
        if tried == 0 {
            return out;
        }
        let mean = q.iter().zip(n).filter(|(_, &v)| v > 0).map(|(x, _)| x).sum::<f64>() / tried as f64;
        for ((o, x), &v) in out.iter_mut().zip(q).zip(n) {
            if v > 0 {
                *o = x - mean;
            }
        }
        out
    }

    pub fn max_value(&self, key: &K) -> f64 {
        match self.values.get(key) {
            Some(row) => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&K, &Vec<f64>, &Vec<u32>)> {
        self.values
            .iter()
            .map(move |(k, v)| (k, v, self.visits.get(k).expect("visits track values")))
    }

    /// Inserts a full row, e.g. when loading a table from disk.
    pub fn insert_row(&mut self, key: K, values: Vec<f64>, visits: Vec<u32>) -> Result<()> {
        if values.len() != self.n_actions || visits.len() != self.n_actions {
            return Err(Error::InvalidParameter(alloc::format!(
                "row has {} values and {} visit counts, table has {} actions",
                values.len(),
                visits.len(),
                self.n_actions
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Q-values must be finite".into()));
        }
        self.values.insert(key.clone(), values);
        self.visits.insert(key, visits);
        Ok(())
    }

    /// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`; a `None`
    /// next state is terminal and contributes no future value.
    pub fn update(&mut self, key: &K, action: usize, reward: f64, next: Option<&K>, p: &LearnerParams) -> Result<f64> {
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward(reward));
        }
        if action >= self.n_actions {
            return Err(Error::UnknownAction(action));
        }
        let future = next.map_or(0.0, |k| self.max_value(k));
        let n = self.n_actions;
        let row = self.values.entry(key.clone()).or_insert_with(|| vec![0.0; n]);
        let q = row[action];
        row[action] = q + p.alpha * (reward + p.gamma * future - q);
        let updated = row[action];
        self.visits.entry(key.clone()).or_insert_with(|| vec![0; n])[action] += 1;
        Ok(updated)
    }
}

/// Free-function form of [`QTable::update`].
pub fn q_update<K: Ord + Clone>(
    q: &mut QTable<K>,
    key: &K,
    action: usize,
    reward: f64,
    next: Option<&K>,
    p: &LearnerParams,
) -> Result<f64> {
    q.update(key, action, reward, next, p)
}

/// Action indices ordered by tie-break preference: smallest magnitude
/// first, braking before accelerating at equal magnitude.
pub fn acceleration_preference(actions: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..actions.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (actions[a], actions[b]);
        x.abs()
            .partial_cmp(&y.abs())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(x.partial_cmp(&y).unwrap_or(core::cmp::Ordering::Equal))
    });
    order
}

/// Highest-valued action of `values`; ties follow `preference`.
pub fn greedy(values: &[f64], preference: &[usize]) -> usize {
    let mut best = preference[0];
    for &a in &preference[1..] {
        if values[a] > values[best] {
            best = a;
        }
    }
    best
}

/// Epsilon-greedy draw: with `u ~ U(0,1)`, exploit when `u > epsilon`,
/// otherwise pick uniformly at random.
pub fn select_action<K: Ord + Clone, R: RngCore + ?Sized>(
    q: &QTable<K>,
    key: &K,
    epsilon: f64,
    preference: &[usize],
    rng: &mut R,
) -> usize {
    let u: f64 = rng.random();
    if u > epsilon {
        greedy(&q.row(key), preference)
    } else {
        rng.random_range(0..q.n_actions())
    }
}

/// One transition of an episodic environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub reward: f64,
    /// `None` when the episode ended with this transition.
    pub next: Option<S>,
}

/// Episodic environment with a finite action set.
pub trait Environment {
    type State: Ord + Clone;

    fn n_actions(&self) -> usize;

    /// Tie-break order used by greedy selection.
    fn preference(&self) -> Vec<usize> {
        (0..self.n_actions()).collect()
    }

    fn reset(&mut self, episode: usize, rng: &mut dyn RngCore) -> Self::State;

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<Transition<Self::State>>;
}

/// Per-episode mean reward.
pub type LearningCurve = Vec<f64>;

/// Epsilon-greedy tabular Q-learning for `p.episodes` episodes.
pub fn train_env<E: Environment, R: RngCore>(
    env: &mut E,
    q: &mut QTable<E::State>,
    p: &LearnerParams,
    rng: &mut R,
) -> Result<LearningCurve> {
    p.validate()?;
    let preference = env.preference();
    let mut curve = Vec::with_capacity(p.episodes);
    let mut epsilon = p.epsilon_start;
    for episode in 0..p.episodes {
        let mut state = env.reset(episode, rng);
        let mut total = 0.0;
        let mut steps = 0usize;
        loop {
            let action = select_action(q, &state, epsilon, &preference, rng);
            let tr = env.step(action, rng)?;
            q.update(&state, action, tr.reward, tr.next.as_ref(), p)?;
            total += tr.reward;
            steps += 1;
            match tr.next {
                Some(next) => state = next,
                None => break,
            }
        }
        curve.push(total / steps as f64);
        epsilon = (epsilon * p.epsilon_decay).max(p.epsilon_floor);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> LearnerParams {
        LearnerParams {
            alpha: 0.5,
            gamma: 0.9,
            ..LearnerParams::default()
        }
    }

    #[test]
    fn update_examples() {
        let mut q: QTable<u8> = QTable::new(3);
        let v = q.update(&0, 1, 1.0, Some(&1), &params()).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);

        let full = LearnerParams { alpha: 1.0, ..params() };
        let mut q: QTable<u8> = QTable::new(2);
        q.update(&5, 0, 0.3, Some(&5), &full).unwrap();
        let v = q.update(&5, 0, 0.7, None, &full).unwrap();
        assert_eq!(v, 0.7);

        let mut q: QTable<u8> = QTable::new(2);
        assert_eq!(q.update(&0, 0, 0.0, Some(&0), &params()).unwrap(), 0.0);
        assert_eq!(q.max_value(&0), 0.0);
    }

    #[test]
    fn non_finite_reward_rejected() {
        let mut q: QTable<u8> = QTable::new(2);
        assert!(matches!(q.update(&0, 0, f64::NAN, None, &params()), Err(Error::NonFiniteReward(_))));
        assert!(q.is_empty());
        assert!(matches!(q.update(&0, 0, f64::INFINITY, None, &params()), Err(Error::NonFiniteReward(_))));
        assert!(matches!(q.update(&0, 9, 0.0, None, &params()), Err(Error::UnknownAction(9))));
        assert!(q.is_empty());
    }

    #[test]
    fn reward_combination() {
        assert_eq!(total_reward(1.0, 1.0, 0.5, 0.5), 1.0);
        assert_eq!(total_reward(0.37, 0.81, 0.0, 1.0), 0.81);
        assert_abs_diff_eq!(total_reward(0.5, 0.8, 0.4, 0.6), 0.68, epsilon = 1e-15);
    }

    #[test]
    fn greedy_tie_break_prefers_gentle_braking() {
        let actions = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let pref = acceleration_preference(&actions);
        assert_eq!(pref[..3], [5, 4, 6]);
        let mut q: QTable<u8> = QTable::new(actions.len());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&q, &0, 0.0, &pref, &mut rng), 5);
        q.insert_row(0, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0], vec![0; 9]).unwrap();
        assert_eq!(select_action(&q, &0, 0.0, &pref, &mut rng), 4);
        q.insert_row(1, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0], vec![0; 9]).unwrap();
        for _ in 0..100 {
            assert_eq!(select_action(&q, &1, 0.0, &pref, &mut rng), 8);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q: QTable<u8> = QTable::new(9);
        let pref: Vec<usize> = (0..9).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let mut counts = [0usize; 9];
        for _ in 0..n {
            counts[select_action(&q, &0, 1.0, &pref, &mut rng)] += 1;
        }
        let expected = n as f64 / 9.0;
        let sigma = libm::sqrt(n as f64 * (1.0 / 9.0) * (8.0 / 9.0));
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_schedule_is_monotone() {
        let p = LearnerParams::default();
        let mut last = f64::INFINITY;
        for e in 0..600 {
            let eps = p.epsilon_at(e);
            assert!(eps <= last);
            assert!(eps >= p.epsilon_floor);
            last = eps;
        }
        assert_eq!(p.epsilon_at(0), 1.0);
        assert_eq!(p.epsilon_at(599), p.epsilon_floor);
    }

    #[test]
    fn discretize_bins() {
        let edges = BinEdges::default();
        assert_eq!(bin(&edges.distance, 0.0), 0);
        assert_eq!(bin(&edges.distance, 4.999), 0);
        assert_eq!(bin(&edges.distance, 5.0), 1);
        assert_eq!(bin(&edges.distance, 60.0), 4);
        assert_eq!(bin(&edges.ttc, f64::INFINITY), 4);
        assert_eq!(edges.exited_bin(), 5);
        assert!(edges.validate().is_ok());
        let bad = BinEdges {
            speed: vec![3.0, 1.0],
            ..BinEdges::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn validation() {
        assert!(LearnerParams::default().validate().is_ok());
        assert!(LearnerParams { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(LearnerParams { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(LearnerParams { w1: 0.7, ..Default::default() }.validate().is_err());
    }
}
