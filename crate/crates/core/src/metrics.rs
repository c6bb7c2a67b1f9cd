//! Trace-level metrics: crossing time, minimum speed near the conflict,
//! comfort index and minimum separation.

use serde::{Deserialize, Serialize};

use crate::episode::{ScenarioConfig, Trace};

/// Half-width, along the ego path, of the region around the conflict point
/// where the minimum speed is measured, m.
pub const CONFLICT_REGION: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Time at which the ego passed the exit of the intersection region;
    /// `None` if it never did.
    pub crossing_time: Option<f64>,
    /// Lowest ego speed within the conflict region, m/s.
    pub min_speed: f64,
    /// Accumulated absolute acceleration change times the decision period
    /// over the crossing, m/s.
    pub comfort_index: f64,
    /// Mean absolute acceleration change per decision, m/s^2.
    pub mean_abs_jerk: f64,
    /// Smallest inter-vehicle distance, m. Infinite without a target.
    pub min_distance: f64,
    pub collided: bool,
    /// True when the episode ended before the ego crossed.
    pub partial: bool,
}

/// Computes the metrics of a finished episode. Pure in `trace` and `cfg`.
pub fn compute_metrics(trace: &Trace, cfg: &ScenarioConfig) -> MetricsReport {
    let rows = &trace.rows;
    let exit = cfg.ego_exit_s;
    let mut crossing_time = None;
    let mut crossing_index = rows.len().saturating_sub(1);
    for (k, w) in rows.windows(2).enumerate() {
        if w[0].ego.s_along >= exit {
            crossing_time = Some(w[0].t);
            crossing_index = k;
            break;
        }
        if w[1].ego.s_along >= exit {
            let ds = w[1].ego.s_along - w[0].ego.s_along;
            let frac = if ds > 0.0 { (exit - w[0].ego.s_along) / ds } else { 1.0 };
            crossing_time = Some(w[0].t + frac * (w[1].t - w[0].t));
            crossing_index = k + 1;
            break;
        }
    }
    if crossing_time.is_none() {
        if let Some(r) = rows.first().filter(|r| r.ego.s_along >= exit) {
            crossing_time = Some(r.t);
            crossing_index = 0;
        }
    }
    if trace.collision {
        crossing_time = None;
    }

    let scene = cfg.scene();
    let conflict_s = scene.conflict.map(|c| c.s_second);
    let crossing = &rows[..=crossing_index.min(rows.len().saturating_sub(1))];
    let mut min_speed = f64::INFINITY;
    for r in crossing {
        let inside = conflict_s.is_none_or(|c| (r.ego.s_along - c).abs() <= CONFLICT_REGION);
        if inside {
            min_speed = min_speed.min(r.ego.speed());
        }
    }
    if min_speed == f64::INFINITY {
        min_speed = crossing.iter().map(|r| r.ego.speed()).fold(f64::INFINITY, f64::min);
    }

    // accelerations actually applied during the crossing
    let applied = &crossing[..crossing.len().saturating_sub(1)];
    let jerk_sum: f64 = applied.windows(2).map(|w| (w[1].a_ego - w[0].a_ego).abs()).sum();
    let changes = applied.len().saturating_sub(1);

    MetricsReport {
        crossing_time,
        min_speed,
        comfort_index: jerk_sum * trace.dt,
        mean_abs_jerk: if changes > 0 { jerk_sum / changes as f64 } else { 0.0 },
        min_distance: trace.min_distance(),
        collided: trace.collision,
        partial: crossing_time.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{run_episode, ConstantAccel, GeometryKind, VehicleSpec};
    use crate::geometry::{Path, Segment, Vec2};
    use crate::scenarios::{make_case, BehaviorPolicy, CaseId};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lone(speed: f64) -> ScenarioConfig {
        ScenarioConfig {
            geometry: GeometryKind::Intersection,
            center: Vec2::new(0.0, 30.0),
            lane_width: 3.5,
            ego: VehicleSpec {
                path: Path::new(alloc::vec![Segment::line(Vec2::new(0.0, 0.0), Vec2::new(0.0, 80.0))], "s", "n").unwrap(),
                start_s: 0.0,
                speed,
            },
            target: None,
            ego_exit_s: 60.0,
            v_max: 12.0,
            dt: 0.1,
            horizon: 20.0,
            collision_radius: 2.0,
            target_policy: BehaviorPolicy::Scripted { accel: 0.0 },
        }
    }

    #[test]
    fn constant_speed_crossing() {
        let cfg = lone(12.0);
        let trace = run_episode(&cfg, &mut ConstantAccel(0.0), &mut ConstantAccel(0.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let m = compute_metrics(&trace, &cfg);
        assert_abs_diff_eq!(m.crossing_time.unwrap(), 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.min_speed, 12.0, epsilon = 1e-12);
        assert_eq!(m.comfort_index, 0.0);
        assert_eq!(m.min_distance, f64::INFINITY);
        assert!(!m.collided && !m.partial);
    }

    #[test]
    fn collision_trace_is_flagged() {
        let case = make_case(CaseId::A);
        // the ego eases off just enough to meet the target at the conflict
        let trace = run_episode(&case.scenario, &mut ConstantAccel(-0.3), &mut ConstantAccel(0.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let m = compute_metrics(&trace, &case.scenario);
        assert!(m.collided);
        assert!(m.crossing_time.is_none());
        assert!(m.partial);
        assert!(m.min_distance < case.scenario.collision_radius);
    }

    #[test]
    fn metrics_are_a_pure_function_of_the_trace() {
        let case = make_case(CaseId::B);
        let trace = run_episode(&case.scenario, &mut ConstantAccel(-1.0), &mut ConstantAccel(0.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let a = compute_metrics(&trace, &case.scenario);
        let b = compute_metrics(&trace, &case.scenario);
        assert_eq!(format_bits(&a), format_bits(&b));
    }

    fn format_bits(m: &MetricsReport) -> [u64; 5] {
        [
            m.crossing_time.unwrap_or(f64::NAN).to_bits(),
            m.min_speed.to_bits(),
            m.comfort_index.to_bits(),
            m.mean_abs_jerk.to_bits(),
            m.min_distance.to_bits(),
        ]
    }

    #[test]
    fn comfort_index_accumulates_jerk() {
        // 12 m/s for 0.5 s, then steady braking: a single change of 1 m/s^2.
        struct Brake(usize);
        impl crate::episode::EgoDecider for Brake {
            fn decide(
                &mut self,
                _: &crate::world::Scene,
                _: &crate::world::JointState,
                _: &mut dyn rand::RngCore,
            ) -> crate::Result<crate::episode::Decision> {
                self.0 += 1;
                let accel = if self.0 > 5 { -1.0 } else { 0.0 };
                Ok(crate::episode::Decision {
                    accel,
                    action: None,
                    diagnostics: Default::default(),
                })
            }
        }
        let cfg = lone(12.0);
        let trace = run_episode(&cfg, &mut Brake(0), &mut ConstantAccel(0.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let m = compute_metrics(&trace, &cfg);
        assert_abs_diff_eq!(m.comfort_index, 0.1, epsilon = 1e-12);
    }
}
