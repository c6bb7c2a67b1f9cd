//! Two-player game over discrete accelerations: payoff matrix, pure Nash
//! equilibria, nearest-equilibrium selection and the proximity reward.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{exp, sqrt};
use crate::payoff::{ego_payoff_of, malicious_payoff_of, predict_outcome, PayoffParams, WeightMode};
use crate::world::{JointState, Scene};

/// Payoff differences within this tolerance count as ties.
pub const BEST_RESPONSE_TOL: f64 = 1e-9;

/// Dense bimatrix game. Cell `(i, j)` is ego action `i` against target
/// action `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    pub ego_actions: Vec<f64>,
    pub target_actions: Vec<f64>,
    u_ego: Vec<f64>,
    u_target: Vec<f64>,
}

impl GameMatrix {
    /// Builds a matrix from row-major payoff tables (`rows` = ego actions).
    ///
    /// # Panics
    /// If the tables do not match the action-list dimensions or hold
    /// non-finite values.
    pub fn from_tables(ego_actions: Vec<f64>, target_actions: Vec<f64>, u_ego: Vec<f64>, u_target: Vec<f64>) -> Self {
        let cells = ego_actions.len() * target_actions.len();
        assert_eq!(u_ego.len(), cells, "ego payoff table has wrong size");
        assert_eq!(u_target.len(), cells, "target payoff table has wrong size");
        assert!(
            u_ego.iter().chain(&u_target).all(|v| v.is_finite()),
            "payoffs must be finite"
        );
        GameMatrix {
            ego_actions,
            target_actions,
            u_ego,
            u_target,
        }
    }

    pub fn rows(&self) -> usize {
        self.ego_actions.len()
    }

    pub fn cols(&self) -> usize {
        self.target_actions.len()
    }

    pub fn u_ego(&self, i: usize, j: usize) -> f64 {
        self.u_ego[i * self.cols() + j]
    }

    pub fn u_target(&self, i: usize, j: usize) -> f64 {
        self.u_target[i * self.cols() + j]
    }

    /// The same game with the players' roles exchanged.
    pub fn swapped(&self) -> GameMatrix {
        let (r, c) = (self.rows(), self.cols());
        let mut u_ego = Vec::with_capacity(r * c);
        let mut u_target = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                u_ego.push(self.u_target(i, j));
                u_target.push(self.u_ego(i, j));
            }
        }
        GameMatrix {
            ego_actions: self.target_actions.clone(),
            target_actions: self.ego_actions.clone(),
            u_ego,
            u_target,
        }
    }
}

/// Evaluates every joint candidate: the ego with its own payoff, the target
/// with the malicious payoff.
pub fn build_matrix(
    scene: &Scene,
    s: &JointState,
    ego_actions: &[f64],
    target_actions: &[f64],
    p: &PayoffParams,
    ego_mode: WeightMode,
    target_mode: WeightMode,
) -> GameMatrix {
    let cells = ego_actions.len() * target_actions.len();
    let mut u_ego = Vec::with_capacity(cells);
    let mut u_target = Vec::with_capacity(cells);
    for &a_e in ego_actions {
        for &a_t in target_actions {
            let o = predict_outcome(scene, s, a_e, a_t, p);
            u_ego.push(ego_payoff_of(scene, &o, s.ego.a_next, a_e, p, ego_mode).total);
            u_target.push(malicious_payoff_of(&o, p, target_mode).total);
        }
    }
    GameMatrix::from_tables(ego_actions.to_vec(), target_actions.to_vec(), u_ego, u_target)
}

/// All pure-strategy equilibria, in row-major order.
pub fn find_pure_nash(m: &GameMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (m.rows(), m.cols());
    let col_best: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| m.u_ego(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let row_best: Vec<f64> = (0..rows)
        .map(|i| (0..cols).map(|j| m.u_target(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut out = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if m.u_ego(i, j) >= col_best[j] - BEST_RESPONSE_TOL && m.u_target(i, j) >= row_best[i] - BEST_RESPONSE_TOL {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashResult {
    pub equilibria: Vec<(usize, usize)>,
    /// Selected cell: nearest equilibrium, or the welfare maximum when
    /// there is no pure equilibrium.
    pub nearest: (usize, usize),
    /// Euclidean distance in acceleration space from the current joint
    /// action to `nearest`, m/s^2.
    pub distance: f64,
    /// True when no pure equilibrium existed.
    pub fallback: bool,
}

fn joint_distance(m: &GameMatrix, cell: (usize, usize), current: (f64, f64)) -> f64 {
    let de = m.ego_actions[cell.0] - current.0;
    let dt = m.target_actions[cell.1] - current.1;
    sqrt(de * de + dt * dt)
}

/// Picks the equilibrium closest to `current = (a_ego, a_target)`.
///
/// Ties go to the lowest ego index, then the lowest target index. With no
/// equilibrium the welfare-maximizing cell stands in.
pub fn nearest_nash(m: &GameMatrix, equilibria: &[(usize, usize)], current: (f64, f64)) -> NashResult {
    if equilibria.is_empty() {
        let mut best = (0, 0);
        let mut best_w = f64::NEG_INFINITY;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let w = m.u_ego(i, j) + m.u_target(i, j);
                if w > best_w {
                    best_w = w;
                    best = (i, j);
                }
            }
        }
        return NashResult {
            equilibria: Vec::new(),
            nearest: best,
            distance: joint_distance(m, best, current),
            fallback: true,
        };
    }
    let mut sorted = equilibria.to_vec();
    sorted.sort_unstable();
    let mut nearest = sorted[0];
    let mut distance = joint_distance(m, nearest, current);
    for &cell in &sorted[1..] {
        let d = joint_distance(m, cell, current);
        if d < distance - 1e-12 {
            nearest = cell;
            distance = d;
        }
    }
    NashResult {
        equilibria: sorted,
        nearest,
        distance,
        fallback: false,
    }
}

/// Nash-proximity reward `2 / (1 + e^{delta * d})`: 1 at an equilibrium,
/// decaying to 0 with distance.
pub fn game_reward(distance: f64, delta: f64) -> f64 {
    let z = delta * distance;
    if z > 700.0 {
        return 0.0;
    }
    2.0 / (1.0 + exp(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn game(rows: usize, cols: usize, u_ego: &[f64], u_target: &[f64]) -> GameMatrix {
        GameMatrix::from_tables(
            (0..rows).map(|i| i as f64).collect(),
            (0..cols).map(|j| j as f64).collect(),
            u_ego.to_vec(),
            u_target.to_vec(),
        )
    }

    #[test]
    fn prisoners_dilemma() {
        // action 0 = cooperate, 1 = defect; T=5 > R=3 > P=1 > S=0
        let m = game(2, 2, &[3.0, 0.0, 5.0, 1.0], &[3.0, 5.0, 0.0, 1.0]);
        assert_eq!(find_pure_nash(&m), alloc::vec![(1, 1)]);
    }

    #[test]
    fn matching_pennies_has_no_pure_equilibrium() {
        let m = game(2, 2, &[1.0, -1.0, -1.0, 1.0], &[-1.0, 1.0, 1.0, -1.0]);
        assert!(find_pure_nash(&m).is_empty());
        let nr = nearest_nash(&m, &[], (0.0, 0.0));
        assert!(nr.fallback);
    }

    #[test]
    fn dominant_strategies() {
        let m = game(
            3,
            3,
            &[0.1, 0.2, 0.3, 0.9, 0.8, 0.7, 0.0, 0.1, 0.0],
            &[0.0, 0.5, 0.1, 0.0, 0.6, 0.2, 0.3, 0.4, 0.1],
        );
        assert_eq!(find_pure_nash(&m), alloc::vec![(1, 1)]);
    }

    #[test]
    fn degenerate_single_cell() {
        let m = GameMatrix::from_tables(alloc::vec![0.0], alloc::vec![0.0], alloc::vec![0.4], alloc::vec![0.2]);
        let eq = find_pure_nash(&m);
        assert_eq!(eq, alloc::vec![(0, 0)]);
        let nr = nearest_nash(&m, &eq, (0.0, 0.0));
        assert_eq!(nr.distance, 0.0);
    }

    #[test]
    fn nearest_selection() {
        let m = GameMatrix::from_tables(
            alloc::vec![-2.0, 0.0, 2.0],
            alloc::vec![-1.0, 0.0, 1.0],
            alloc::vec![0.0; 9],
            alloc::vec![0.0; 9],
        );
        let nr = nearest_nash(&m, &[(1, 1)], (-2.0, 1.0));
        assert_abs_diff_eq!(nr.distance, sqrt(5.0), epsilon = 1e-15);
        let nr = nearest_nash(&m, &[(2, 0), (0, 1)], (0.0, 0.0));
        assert_eq!(nr.nearest, (0, 1), "equidistant: lowest ego index wins");
        let nr = nearest_nash(&m, &[(2, 2), (0, 0)], (-2.0, -1.0));
        assert_eq!(nr.distance, 0.0);
        assert_eq!(nr.nearest, (0, 0));
    }

    #[test]
    fn reward_examples() {
        assert_eq!(game_reward(0.0, 1.0), 1.0);
        assert_abs_diff_eq!(game_reward(crate::math::ln(3.0), 1.0), 0.5, epsilon = 1e-15);
        assert_eq!(game_reward(1e6, 1.0), 0.0);
        assert!(game_reward(50.0, 1.0) < 1e-20);
    }

    #[test]
    fn swap_transposes_equilibria() {
        let m = game(2, 3, &[1.0, 0.0, 2.0, 0.5, 3.0, 1.0], &[0.0, 1.0, 0.3, 2.0, 0.0, 1.0]);
        let mut expected: Vec<(usize, usize)> = find_pure_nash(&m).into_iter().map(|(i, j)| (j, i)).collect();
        expected.sort_unstable();
        let mut got = find_pure_nash(&m.swapped());
        got.sort_unstable();
        assert_eq!(got, expected);
    }
}
