use aseq_core::geometry::Vec2;
use aseq_core::payoff::{
    adaptive_safety_weight, comfort_payoff, distance_decay, efficiency_payoff, malicious_efficiency, malicious_safety, safety_payoff, split_weights,
    PayoffParams, WeightMode,
};
use proptest::prelude::*;

const CASES: u32 = 10_000;

fn params() -> impl Strategy<Value = PayoffParams> {
    (0.01f64..0.5, 0.1f64..3.0, 0.1f64..3.0, 0.1f64..1.0, 0.1f64..3.0, 0.2f64..2.0, 2.0f64..8.0).prop_map(
        |(beta, k1, k2, k3, k, ttc_min, crit_gap)| PayoffParams {
            beta,
            k1,
            k2,
            k3,
            k,
            ttc_min,
            ttc_crit: ttc_min + crit_gap,
            ..PayoffParams::default()
        },
    )
}

fn ttc() -> impl Strategy<Value = f64> {
    prop_oneof![9 => 1e-3f64..50.0, 1 => Just(f64::INFINITY)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn weights_close_to_one(p in params(), t in ttc()) {
        let (w_s, w_e, w_c) = WeightMode::Adaptive.weights(t, &p);
        prop_assert!((w_s + w_e + w_c - 1.0).abs() <= 1e-12);
        prop_assert_eq!(w_e, w_c);
        let (a, b) = split_weights(w_s);
        prop_assert!((w_s + a + b - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn safety_weight_in_range(p in params(), t in ttc()) {
        let w = adaptive_safety_weight(t, &p);
        prop_assert!((1.0 / 3.0..=1.0).contains(&w), "{}", w);
    }

    #[test]
    fn payoffs_in_unit_interval(
        p in params(),
        v in 0.0f64..30.0,
        x in -200.0f64..200.0,
        y in -200.0f64..200.0,
        t in ttc(),
        t_rem in 0.0f64..100.0,
        t_min in 0.01f64..20.0,
        a_prev in -5.0f64..3.0,
        a in -5.0f64..3.0,
        d in 0.0f64..300.0,
    ) {
        let unit = |f: f64| (0.0..=1.0).contains(&f);
        prop_assert!(unit(safety_payoff(v, Vec2::new(x, y), t, &p, Vec2::ZERO)));
        prop_assert!(unit(efficiency_payoff(t_rem, t_min, p.k2)));
        prop_assert!(unit(comfort_payoff(a_prev, a, &p)));
        prop_assert!(unit(distance_decay(Vec2::new(x, y), Vec2::ZERO, p.beta)));
        prop_assert!(unit(malicious_safety(d, t, &p)));
        prop_assert!(unit(malicious_efficiency(v, &p)));
    }

    #[test]
    fn safety_increases_with_ttc(p in params(), t in 0.0f64..30.0, dt in 1e-3f64..5.0) {
        // upper branch: above the speed threshold and past ttc_min
        let t1 = p.ttc_min + t;
        let v = p.v_threshold + 1.0;
        let f1 = safety_payoff(v, Vec2::ZERO, t1, &p, Vec2::ZERO);
        let f2 = safety_payoff(v, Vec2::ZERO, t1 + dt, &p, Vec2::ZERO);
        // strict until 1 - e^-x rounds to the same double near 1
        let saturated = f1 > 1.0 - 1e-12;
        prop_assert!(f2 > f1 || (saturated && f2 == f1), "{} {}", f1, f2);
    }

    #[test]
    fn efficiency_decreases_with_remaining_time(p in params(), t_min in 0.1f64..10.0, extra in 0.0f64..10.0, dt in 1e-3f64..5.0) {
        let t = t_min + extra;
        prop_assert!(efficiency_payoff(t + dt, t_min, p.k2) < efficiency_payoff(t, t_min, p.k2));
    }

    #[test]
    fn comfort_decreases_with_acceleration_change(p in params(), a_prev in -5.0f64..3.0, d1 in 0.0f64..4.0, dd in 1e-3f64..4.0) {
        // stay inside the action range so no clamp applies
        let span = p.a_max - p.a_min;
        let (d1, d2) = (d1.min(span - 1e-3), (d1 + dd).min(span));
        prop_assume!(d2 > d1);
        let c1 = comfort_payoff(a_prev, a_prev + d1, &p);
        let c2 = comfort_payoff(a_prev, a_prev + d2, &p);
        prop_assert!(c2 < c1, "{} {}", c1, c2);
    }

    #[test]
    fn safety_weight_non_increasing_in_ttc(p in params(), t in 1e-3f64..10.0, dt in 0.0f64..5.0) {
        prop_assert!(adaptive_safety_weight(t + dt, &p) <= adaptive_safety_weight(t, &p));
    }
}

#[test]
fn reference_values() {
    let p = PayoffParams::default();
    // 1/3 + 2/3 (1 - e^-2) at half the critical TTC
    let w = adaptive_safety_weight(2.0, &p);
    assert!((w - (1.0 / 3.0 + 2.0 / 3.0 * (1.0 - (-2.0f64).exp()))).abs() < 1e-15);
    assert_eq!(adaptive_safety_weight(4.5, &p), 1.0 / 3.0);
    // 1 - e^-(3 - 1)
    assert!((safety_payoff(5.0, Vec2::ZERO, 3.0, &p, Vec2::ZERO) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    // slow vehicle 20 m from the centre: e^-1
    assert!((safety_payoff(1.0, Vec2::new(20.0, 0.0), 3.0, &p, Vec2::ZERO) - (-1.0f64).exp()).abs() < 1e-15);
    // 1 - |2 - (-2)| / 8
    assert_eq!(comfort_payoff(-2.0, 2.0, &p), 0.5);
    assert!((efficiency_payoff(6.0, 4.0, 1.0) - (-0.5f64).exp()).abs() < 1e-15);
}
