use bohm_core::current::{CurrentProvider, LinearFlowProvider};
use bohm_core::verify::BoxRegion;
use bohm_core::*;
use proptest::prelude::*;

fn provider(name: &str) -> ScenarioProvider {
    ScenarioProvider::new(scenario_by_name(name, &ScenarioParams::new()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_flow_trajectories_are_exponential(
        rate in -1.0f64..1.0,
        q0 in proptest::collection::vec(-2.0f64..2.0, 2),
        horizon in 0.1f64..2.0,
    ) {
        let p = LinearFlowProvider::new(2, rate, 1.0, 10.0, 16).unwrap();
        let tr = integrate(&p, &ConfigSpace::euclidean(2), &q0, horizon, &IntegratorConfig::default()).unwrap();
        prop_assert_eq!(tr.status, Status::Completed);
        let exact = p.flow(horizon, &q0);
        for (a, b) in tr.final_sample().q.iter().zip(&exact) {
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn round_trip_returns_to_start(q0 in -2.5f64..2.5, horizon in 0.2f64..2.0) {
        let p = provider("free_gaussian");
        prop_assert!(reverse_roundtrip(&p, &[q0], horizon, &IntegratorConfig::default()).unwrap() <= 1e-6);
    }

    #[test]
    fn trajectories_preserve_order_in_one_dimension(a in -3.0f64..3.0, gap in 1e-3f64..1.0, horizon in 0.1f64..2.0) {
        let p = provider("coherent_state");
        let space = ConfigSpace::euclidean(1);
        let cfg = IntegratorConfig::default();
        let qa = integrate(&p, &space, &[a], horizon, &cfg).unwrap().final_sample().q[0];
        let qb = integrate(&p, &space, &[a + gap], horizon, &cfg).unwrap().final_sample().q[0];
        prop_assert!(qa < qb);
    }

    #[test]
    fn diagnostics_are_nonnegative_and_path_bounds_displacement(q0 in -3.0f64..3.0, horizon in 0.1f64..2.0) {
        let p = provider("oscillator_superposition");
        let tr = integrate(&p, &ConfigSpace::euclidean(1), &[q0], horizon, &IntegratorConfig::default()).unwrap();
        let d = &tr.diagnostics;
        prop_assert!(d.log_density >= 0.0 && d.path >= 0.0);
        let end = tr.final_sample();
        prop_assert!(d.path + 1e-12 >= (end.q[0].abs() - q0.abs()).abs());
        let start_j0 = tr.samples[0].j0;
        prop_assert!(d.log_density + 1e-12 >= (end.j0.ln() - start_j0.ln()).abs());
    }

    #[test]
    fn sampled_points_lie_on_the_support(seed in any::<u64>(), n in 1usize..200) {
        let p = provider("free_gaussian_2d");
        let ens = sample_initial(&p, n, seed).unwrap();
        prop_assert_eq!(ens.len(), n);
        prop_assert!(ens.points.iter().all(|q| p.support().contains(q)));
        prop_assert_eq!(&sample_initial(&p, n, seed).unwrap().points, &ens.points);
    }

    #[test]
    fn linear_flow_transports_random_boxes(
        cx in -1.0f64..1.0,
        cy in -1.0f64..1.0,
        r in 0.05f64..0.5,
        rate in -0.5f64..0.5,
    ) {
        let p = LinearFlowProvider::new(2, rate, 1.0, 10.0, 16).unwrap();
        let b = BoxRegion::around(&[cx, cy], r).unwrap();
        let rows = transport_check(&p, &ConfigSpace::euclidean(2), &[b], 0.7, &IntegratorConfig::default(), 8).unwrap();
        prop_assert!(rows[0].discrepancy <= 1e-6, "{:?}", rows[0]);
    }

    #[test]
    fn condition_integrals_grow_with_radius(r in 0.5f64..3.0, extra in 0.1f64..1.0) {
        let p = LinearFlowProvider::new(1, 0.3, 1.0, 10.0, 64).unwrap();
        let space = ConfigSpace::euclidean(1);
        let spec = ConditionSpec::new(0.05, 0.1);
        let a = condition_integrals(&p, &space, r, 1.0, &spec).unwrap();
        let b = condition_integrals(&p, &space, r + extra, 1.0, &spec).unwrap();
        prop_assert!(b.i_node >= a.i_node && b.i_escape >= a.i_escape && b.ed_bound >= a.ed_bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn equal_mass_bins_carry_equal_expected_mass(bins in 4usize..80, seed in any::<u64>()) {
        let p = provider("coherent_state");
        let ens = sample_initial(&p, 500, seed).unwrap();
        let out = pushforward(&ens, &p, &ConfigSpace::euclidean(1), 0.5, &IntegratorConfig::default()).unwrap();
        let r = equivariance_test(&out, &p, 0.5, bins).unwrap();
        prop_assert_eq!(r.per_bin.len(), bins);
        let total: f64 = r.per_bin.iter().map(|b| b.expected).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let observed: f64 = r.per_bin.iter().map(|b| b.observed).sum();
        prop_assert!((observed - (1.0 - r.cemetery_fraction)).abs() < 1e-12);
    }
}
