use orbitkit::algebra::{enlarge_field, lie_bracket, FlowWord};
use orbitkit::catalog;
use orbitkit::compose::{compose_flows, compose_inverse, d_psi};
use orbitkit::fields::estimate_lb_bound;
use orbitkit::flow::{check_existence_with_horizon, flow_single};
use orbitkit::orbit::{orbit_sample, replay_word, OrbitOptions};
use orbitkit::space::{norm1, truncate};
use orbitkit::{Ball, FieldFamily, FlowConfig, L1Coefficients, LbRecord, Point};
use proptest::prelude::*;

fn lb(fam: &FieldFamily, radius: f64) -> LbRecord {
    let region = Ball::in_space(fam.space(), Point::zeros(fam.dimension()), radius).unwrap();
    estimate_lb_bound(fam, &region, 2, 32).unwrap()
}

fn cfg() -> FlowConfig {
    FlowConfig::with_tol(1e-10).recording(false)
}

fn point3() -> impl Strategy<Value = Point> {
    prop::collection::vec(-0.5f64..0.5, 3).prop_map(Point::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flow_group_law(field in 0usize..9, s in -0.5f64..0.5, t in -0.5f64..0.5, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let fields = catalog::analytic_catalog();
        let f = &fields[field];
        let x = Point::from_fn(f.dimension(), |i, _| if i == 0 { a } else { b });
        let c = cfg();
        let two = flow_single(f, &flow_single(f, &x, s, &c).unwrap().endpoint, t, &c).unwrap().endpoint;
        let one = flow_single(f, &x, s + t, &c).unwrap().endpoint;
        prop_assert!((two - one).amax() <= 1e-9);
    }

    #[test]
    fn guard_margin_shrinks_with_time(t in 0.0f64..1.0, dt in 0.0f64..1.0, x in point3()) {
        let h = catalog::heisenberg();
        let l = lb(&h, 10.0);
        let a = check_existence_with_horizon(&h, &l, 1.0, &x, t, f64::INFINITY).unwrap();
        let b = check_existence_with_horizon(&h, &l, 1.0, &x, t + dt, f64::INFINITY).unwrap();
        prop_assert!(b.margin <= a.margin);
        prop_assert_eq!(a.satisfied, a.margin > 0.0);
    }

    #[test]
    fn truncation_splits_the_norm(values in prop::collection::vec(-2.0f64..2.0, 1..30), n in 0usize..40) {
        let tau = L1Coefficients::from_dense(&values);
        let (kept, tail) = truncate(&tau, n);
        prop_assert!((norm1(&kept) + tail - norm1(&tau)).abs() <= 1e-12);
        prop_assert!(kept.support_len() <= n);
    }

    #[test]
    fn composition_inverse_round_trip(a in -0.15f64..0.15, b in -0.15f64..0.15, x in point3()) {
        let h = catalog::heisenberg();
        let l = lb(&h, 10.0);
        let tau = L1Coefficients::finite([(0, a), (1, b)]).unwrap();
        let fwd = compose_flows(&h, &l, &tau, &x, &cfg()).unwrap();
        let total: f64 = fwd.word.iter().map(|(_, t)| t.abs()).sum();
        prop_assert!((total - norm1(&tau)).abs() <= 1e-15);
        let back = compose_inverse(&h, &l, &tau, &fwd.endpoint, &cfg()).unwrap();
        prop_assert!((back.endpoint - x).amax() <= 1e-9);
    }

    #[test]
    fn chart_differential_is_linear(a in -0.1f64..0.1, b in -0.1f64..0.1, s in -1.0f64..1.0, u in -1.0f64..1.0, x in point3()) {
        let h = catalog::heisenberg();
        let l = lb(&h, 10.0);
        let tau = L1Coefficients::finite([(0, a), (1, b)]).unwrap();
        let e0 = d_psi(&h, &l, &x, &tau, &L1Coefficients::unit(0), &cfg()).unwrap();
        let e1 = d_psi(&h, &l, &x, &tau, &L1Coefficients::unit(1), &cfg()).unwrap();
        let sigma = L1Coefficients::finite([(0, s), (1, u)]).unwrap();
        let d = d_psi(&h, &l, &x, &tau, &sigma, &cfg()).unwrap();
        prop_assert!((d - (e0 * s + e1 * u)).amax() <= 1e-12);
    }

    #[test]
    fn bracket_is_antisymmetric(i in 0usize..2, j in 0usize..2, x in point3()) {
        let h = catalog::heisenberg();
        let (a, b) = (&h.members()[i], &h.members()[j]);
        let xy = lie_bracket(a, b, &x).unwrap();
        let yx = lie_bracket(b, a, &x).unwrap();
        prop_assert!((xy + yx).amax() <= 1e-12);
    }

    #[test]
    fn empty_word_enlargement_is_the_base_field(i in 0usize..2, x in point3()) {
        let h = catalog::heisenberg();
        let e = enlarge_field(&h, &FlowWord::empty(), i, 1.0, &lb(&h, 10.0)).unwrap();
        prop_assert!((e.eval(&x) - h.members()[i].eval(&x)).amax() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn orbit_words_replay_to_their_points(seed in any::<u64>()) {
        let h = catalog::heisenberg();
        let s = orbit_sample(&h, &lb(&h, 10.0), &Point::zeros(3), 40, 8, seed, &OrbitOptions::default()).unwrap();
        for p in &s.cloud {
            let q = replay_word(&h, &s.seed_point, &p.word, 1e-9).unwrap();
            prop_assert!((q - &p.point).amax() <= 1e-8);
        }
    }
}

#[test]
fn commuting_cloud_stays_in_its_plane() {
    let c = catalog::commuting_constants(3, 2).unwrap();
    let s = orbit_sample(&c, &lb(&c, 4.0), &Point::zeros(3), 300, 6, 5, &OrbitOptions::default()).unwrap();
    assert!(s.cloud.iter().all(|p| p.point[2].abs() <= 1e-9));
}

#[test]
fn grushin_cloud_leaves_the_axis_with_long_durations() {
    // guard-scaled durations keep |y| below 0.12 after four letters, so this
    // Monte-Carlo check runs with unit durations under the override
    let g = catalog::grushin();
    let opts = OrbitOptions {
        d_max: Some(1.0),
        allow_unsafe: true,
        ..OrbitOptions::default()
    };
    let s = orbit_sample(&g, &lb(&g, 4.0), &Point::zeros(2), 2000, 4, 17, &opts).unwrap();
    let off_axis = s.cloud.iter().filter(|p| p.point[1].abs() > 0.1).count() as f64 / s.cloud.len() as f64;
    assert!(s.cloud.iter().any(|p| p.point[0] < 0.0));
    assert!(s.cloud.iter().any(|p| p.point[0] > 0.0));
    assert!(off_axis > 0.2, "off-axis fraction {off_axis}");
}
