use std::f64::consts::PI;
use std::sync::Arc;

use bohm_core::current::{CurrentProvider, CurrentSample, FnProvider, TimeWindow};
use bohm_core::scenario::OscillatorSuperposition;
use bohm_core::trajectory::RecordMode;
use bohm_core::*;

fn provider(name: &str) -> ScenarioProvider {
    ScenarioProvider::new(scenario_by_name(name, &ScenarioParams::new()).unwrap())
}

/// Closed-form density of the free Gaussian with `σ = ħ = m = 1`.
fn free_density(t: f64, q: f64) -> f64 {
    let w2 = 1.0 + t * t / 4.0;
    (-q * q / (2.0 * w2)).exp() / (2.0 * PI * w2).sqrt()
}

#[test]
fn free_gaussian_trajectories_follow_the_spreading_law() {
    let p = provider("free_gaussian");
    let space = ConfigSpace::euclidean(1);
    for q0 in [-2.5, -0.7, 0.01, 1.3, 3.0] {
        let tr = integrate(&p, &space, &[q0], 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(tr.status, Status::Completed);
        for s in &tr.samples {
            let exact = q0 * (1.0 + s.t * s.t / 4.0).sqrt();
            assert!((s.q[0] - exact).abs() <= 1e-4 * exact.abs(), "q0={q0} t={} {} vs {exact}", s.t, s.q[0]);
            assert!((s.j0 - free_density(s.t, s.q[0])).abs() < 1e-12);
        }
    }
}

#[test]
fn collision_start_hits_the_node_at_the_oracle_time() {
    let p = provider("oscillator_superposition");
    let cfg = IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        node_policy: NodePolicy::new(1e-6).unwrap(),
        ..Default::default()
    };
    let q0 = OscillatorSuperposition::collision_start();
    let tr = integrate(&p, &ConfigSpace::euclidean(1), &[q0], 2.0, &cfg).unwrap();
    assert_eq!(tr.status, Status::NodeHit);
    let (t_node, q_node) = OscillatorSuperposition::collision_point();
    let tau = tr.tau_estimate.unwrap();
    assert!((tau - t_node).abs() < 1e-3, "tau {tau}");
    assert!((tr.final_sample().q[0] - q_node).abs() < 1e-2);
}

#[test]
fn log_density_variation_grows_as_the_node_threshold_tightens() {
    let p = provider("oscillator_superposition");
    let q0 = OscillatorSuperposition::collision_start();
    let ls: Vec<f64> = [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&eps| {
            let cfg = IntegratorConfig {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                node_policy: NodePolicy::new(eps).unwrap(),
                ..Default::default()
            };
            let tr = integrate(&p, &ConfigSpace::euclidean(1), &[q0], 2.0, &cfg).unwrap();
            assert_eq!(tr.status, Status::NodeHit);
            tr.diagnostics.log_density
        })
        .collect();
    // Each decade of threshold adds about ln 10 to L.
    for w in ls.windows(2) {
        assert!(w[1] - w[0] > 1.5, "{ls:?}");
    }
}

#[test]
fn centre_trajectory_log_density_variation_is_the_density_drop() {
    let p = provider("free_gaussian");
    let tr = integrate(&p, &ConfigSpace::euclidean(1), &[0.0], 1.0, &IntegratorConfig::default()).unwrap();
    let expected = (free_density(0.0, 0.0) / free_density(1.0, 0.0)).ln();
    assert!((tr.diagnostics.log_density - expected).abs() < 1e-9, "{}", tr.diagnostics.log_density);
    let standalone = diag_log_density_variation(&tr, &p);
    assert!((standalone - expected).abs() < 1e-4, "{standalone} vs {expected}");
    assert_eq!(diag_path_variation(&tr), 0.0);
}

#[test]
fn path_variation_of_outgoing_trajectory_is_radial_distance() {
    let p = provider("free_gaussian");
    let q0 = 1.7;
    let tr = integrate(&p, &ConfigSpace::euclidean(1), &[q0], 1.0, &IntegratorConfig::default()).unwrap();
    let exact = q0 * (1.25f64.sqrt() - 1.0);
    assert!((tr.diagnostics.path - exact).abs() < 1e-7);
    assert!((diag_path_variation(&tr) - exact).abs() < 1e-7);
}

/// Constant unit velocity along the first axis, with the origin singular.
fn straight_flow(delta: f64) -> FnProvider {
    let space = ConfigSpace::new(2, vec![SingularSubspace::point(vec![0.0, 0.0])], delta).unwrap();
    FnProvider::new(GridSpec::cube(2, 4.0, 16).unwrap(), space, TimeWindow::unbounded(), 1.0, |_, _| {
        CurrentSample::new(1.0, vec![1.0, 0.0])
    })
}

#[test]
fn singular_variation_of_straight_pass_is_twice_log_ratio() {
    let (delta, a) = (0.5, 0.01);
    let p = straight_flow(delta);
    let space = p.config_space().clone();
    let tr = integrate(&p, &space, &[-1.0, a], 2.0, &IntegratorConfig::default()).unwrap();
    assert_eq!(tr.status, Status::Completed);
    let expected = 2.0 * (delta / a).ln();
    assert!((tr.diagnostics.singular[0] - expected).abs() < 1e-3 * expected, "{:?}", tr.diagnostics);
    // The standalone estimate sees only recorded samples, so the tube entry
    // step is counted whole.
    assert!((diag_singular_variation(&tr, &space, 0).unwrap() - expected).abs() < 2e-2 * expected);
}

#[test]
fn singular_variation_grows_like_log_of_the_margin() {
    let delta = 0.5;
    let p = straight_flow(delta);
    let space = p.config_space().clone();
    for m in [1e-2, 1e-4, 1e-6] {
        let cfg = IntegratorConfig { singular_margin: m, ..Default::default() };
        let tr = integrate(&p, &space, &[-1.0, 0.0], 2.0, &cfg).unwrap();
        assert_eq!(tr.status, Status::SingularHit);
        assert!((tr.tau_estimate.unwrap() - (1.0 - m)).abs() < 1e-8);
        let v = tr.diagnostics.singular[0];
        assert!((v - (delta / m).ln()).abs() < 1e-6 * v, "m={m}: {v}");
    }
}

#[test]
fn s_and_t_parameterisations_agree() {
    let p = provider("coherent_state");
    let cfg = IntegratorConfig::default();
    let q0 = 0.4;
    let curve = integrate_s_parameterized(&p, &[q0], 50.0, &cfg).unwrap();
    let space = ConfigSpace::euclidean(1);
    for k in 1..=20 {
        let t = 2.0 * k as f64 / 20.0;
        let a = curve.position_at_time(t).unwrap();
        let b = integrate(&p, &space, &[q0], t, &cfg).unwrap();
        let b = &b.final_sample().q;
        assert!((a[0] - b[0]).abs() < 1e-6, "t={t}: {} vs {}", a[0], b[0]);
    }
}

#[test]
fn s_steps_stay_regular_where_t_steps_collapse_near_a_node() {
    let p = provider("oscillator_superposition");
    let cfg = IntegratorConfig { node_policy: NodePolicy::new(1e-12).unwrap(), ..Default::default() };
    let q0 = OscillatorSuperposition::collision_start();
    let tr = integrate(&p, &ConfigSpace::euclidean(1), &[q0], 2.0, &cfg).unwrap();
    let min_t_step = tr.step_sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let curve = integrate_s_parameterized(&p, &[q0], 200.0, &cfg).unwrap();
    let (_, t_end) = curve.t_range();
    // `dt/ds = j⁰` nearly vanishes close to the collision, so the curve creeps up to it.
    assert!(t_end > PI / 2.0 - 1e-3, "s-curve stopped at t={t_end}");
    let near: Vec<f64> = curve
        .s
        .windows(2)
        .zip(&curve.step_sizes)
        .filter(|(w, _)| (curve.t_of_s(w[0]) - PI / 2.0).abs() < 0.05)
        .map(|(_, h)| *h)
        .collect();
    assert!(!near.is_empty());
    let min_s_step = near.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min_s_step >= 0.1 * cfg.max_step, "s step {min_s_step}");
    assert!(min_t_step < 1e-2 * cfg.max_step, "t step {min_t_step}");
}

#[test]
fn round_trip_deviation_is_small_and_tracks_tolerance() {
    let p = provider("free_gaussian");
    let base = IntegratorConfig::default();
    assert!(reverse_roundtrip(&p, &[1.1], 1.0, &base).unwrap() <= 1e-6);
    let devs: Vec<f64> = [1e-5, 1e-7, 1e-9, 1e-11]
        .iter()
        .map(|&rel| {
            let cfg = IntegratorConfig { rel_tol: rel, abs_tol: rel * 1e-2, max_step: 1.0, ..base.clone() };
            reverse_roundtrip(&p, &[1.1], 1.0, &cfg).unwrap()
        })
        .collect();
    for w in devs.windows(2) {
        assert!(w[1] < w[0], "{devs:?}");
    }
}

#[test]
fn time_reversed_provider_retraces_the_path() {
    let p = provider("coherent_state");
    let space = ConfigSpace::euclidean(1);
    let cfg = IntegratorConfig::default();
    let fwd = integrate(&p, &space, &[0.3], 1.5, &cfg).unwrap();
    let q1 = fwd.final_sample().q.clone();
    let rev = time_reverse(p);
    let back = integrate_from(&rev, &space, &q1, -1.5, 0.0, &cfg).unwrap();
    assert!((back.final_sample().q[0] - 0.3).abs() < 1e-7);
}

#[test]
fn endpoint_mode_keeps_two_samples_and_same_result() {
    let p = provider("free_gaussian");
    let space = ConfigSpace::euclidean(1);
    let full = integrate(&p, &space, &[0.8], 1.0, &IntegratorConfig::default()).unwrap();
    let ends =
        integrate(&p, &space, &[0.8], 1.0, &IntegratorConfig { record: RecordMode::Endpoints, ..Default::default() })
            .unwrap();
    assert_eq!(ends.samples.len(), 2);
    assert_eq!(ends.final_sample().q, full.final_sample().q);
    assert_eq!(ends.diagnostics, full.diagnostics);
}

#[test]
fn escape_radius_stops_a_spreading_trajectory() {
    let p = provider("free_gaussian");
    let cfg = IntegratorConfig { escape_radius: 2.5, ..Default::default() };
    let tr = integrate(&p, &ConfigSpace::euclidean(1), &[2.0], 4.0, &cfg).unwrap();
    assert_eq!(tr.status, Status::Escaped);
    // 2·sqrt(1 + t²/4) = 2.5 at t = 1.5.
    assert!((tr.tau_estimate.unwrap() - 1.5).abs() < 1e-6);
}

#[test]
fn dirac_right_mover_moves_at_c() {
    let s = scenario_by_name("dirac_massless", &ScenarioParams::new()).unwrap();
    let p = ScenarioProvider::new(Arc::clone(&s));
    let tr = integrate(&p, &ConfigSpace::euclidean(1), &[0.2], 1.0, &IntegratorConfig::default()).unwrap();
    let exact = s.trajectory(&[0.2], 1.0).unwrap();
    assert!((tr.final_sample().q[0] - exact[0]).abs() < 1e-9);
}
