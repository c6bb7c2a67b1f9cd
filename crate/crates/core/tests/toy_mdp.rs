use aseq_core::qlearn::{greedy, train_env, Environment, LearnerParams, QTable, Transition};
use aseq_core::Result;
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEFT: usize = 0;
const RIGHT: usize = 1;
const GAMMA: f64 = 0.9;

/// Chain 0 - 1 - 2. Moving right from 2 leaves the chain with reward 1.
/// Moving left from 0 stays put with a small reward, a tempting loop that
/// is worth less than walking to the exit.
struct Chain {
    state: u8,
}

fn transition(s: u8, a: usize) -> (f64, Option<u8>) {
    match (s, a) {
        (2, RIGHT) => (1.0, None),
        (s, RIGHT) => (0.0, Some(s + 1)),
        (0, _) => (0.05, Some(0)),
        (s, _) => (0.0, Some(s - 1)),
    }
}

impl Environment for Chain {
    type State = u8;

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _episode: usize, rng: &mut dyn RngCore) -> u8 {
        self.state = rng.random_range(0..3);
        self.state
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<Transition<u8>> {
        let (reward, next) = transition(self.state, action);
        if let Some(n) = next {
            self.state = n;
        }
        Ok(Transition { reward, next })
    }
}

fn value_iteration() -> [[f64; 2]; 3] {
    let mut q = [[0.0f64; 2]; 3];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
        for s in 0..3u8 {
            for a in [LEFT, RIGHT] {
                let (r, next) = transition(s, a);
                q[s as usize][a] = r + GAMMA * next.map_or(0.0, |n| v[n as usize]);
            }
        }
    }
    q
}

#[test]
fn value_iteration_reference() {
    // V(2) = 1, V(1) = 0.9, V(0) = 0.81; the loop at 0 is worth 0.779
    let q = value_iteration();
    let expected = [[0.779, 0.81], [0.729, 0.9], [0.81, 1.0]];
    for s in 0..3 {
        for a in 0..2 {
            assert!((q[s][a] - expected[s][a]).abs() < 1e-12, "{q:?}");
        }
    }
}

#[test]
fn q_learning_converges_to_value_iteration() {
    let params = LearnerParams {
        alpha: 0.5,
        gamma: GAMMA,
        epsilon_start: 1.0,
        epsilon_decay: 0.995,
        epsilon_floor: 0.3,
        episodes: 4000,
        ..LearnerParams::default()
    };
    let mut q: QTable<u8> = QTable::new(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let curve = train_env(&mut Chain { state: 0 }, &mut q, &params, &mut rng).unwrap();
    assert_eq!(curve.len(), 4000);
    let reference = value_iteration();
    for s in 0..3u8 {
        for a in 0..2 {
            let got = q.get(&s, a);
            assert!((got - reference[s as usize][a]).abs() < 1e-3, "Q({s},{a}) = {got}, expected {}", reference[s as usize][a]);
        }
        assert_eq!(greedy(&q.row(&s), &[0, 1]), RIGHT, "state {s}");
    }
}

proptest! {
    #[test]
    fn q_values_stay_within_the_discounted_reward_bound(
        steps in prop::collection::vec((0u8..4, 0usize..3, -1.0f64..1.0, prop::option::of(0u8..4)), 1..300),
        alpha in 0.01f64..1.0,
        gamma in 0.0f64..0.99,
    ) {
        let p = LearnerParams { alpha, gamma, ..LearnerParams::default() };
        let mut q: QTable<u8> = QTable::new(3);
        let bound = 1.0 / (1.0 - gamma) + 1e-9;
        for (s, a, r, next) in steps {
            let v = q.update(&s, a, r, next.as_ref(), &p).unwrap();
            prop_assert!(v.is_finite() && v.abs() <= bound);
        }
    }

    #[test]
    fn epsilon_schedule_is_non_increasing_and_floored(
        decay in 0.5f64..1.0,
        floor in 0.0f64..0.5,
        episodes in 1usize..300,
    ) {
        let p = LearnerParams { epsilon_decay: decay, epsilon_floor: floor, ..LearnerParams::default() };
        let mut prev = f64::INFINITY;
        for e in 0..episodes {
            let eps = p.epsilon_at(e);
            prop_assert!(eps <= prev && eps >= floor && eps <= 1.0);
            prev = eps;
        }
    }
}

#[test]
fn single_update_matches_the_rule() {
    let p = LearnerParams {
        alpha: 0.1,
        gamma: 0.95,
        ..LearnerParams::default()
    };
    let mut q: QTable<u8> = QTable::new(2);
    q.insert_row(1, vec![2.0, 4.0], vec![1, 1]).unwrap();
    q.insert_row(0, vec![1.0, 0.0], vec![1, 0]).unwrap();
    // 1 + 0.1 * (0.5 + 0.95 * 4 - 1)
    let v = q.update(&0, 0, 0.5, Some(&1), &p).unwrap();
    assert!((v - 1.33).abs() < 1e-12);
}
