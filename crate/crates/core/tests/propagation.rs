use bohm_core::current::sigma_x;
use bohm_core::propagate::{PdeRun, SplitStepper};
use bohm_core::*;
use num_complex::Complex64;

fn gaussian_spinor(grid: &GridSpec, sigma: f64, upper: Complex64, lower: Complex64) -> SpinorField {
    let mut psi = SpinorField::from_fn(grid.clone(), 2, |q| {
        let g = (-q[0] * q[0] / (4.0 * sigma * sigma)).exp();
        vec![upper * g, lower * g]
    })
    .unwrap();
    psi.normalize().unwrap();
    psi
}

fn centre(psi: &SpinorField) -> f64 {
    let cur = dirac_current(psi, &[sigma_x()], 1.0).unwrap();
    let h = psi.grid.cell_volume();
    (0..psi.n_points()).map(|p| psi.grid.point(p)[0] * cur.j0[p] * h).sum()
}

#[test]
fn massless_right_mover_translates_at_c() {
    let grid = GridSpec::cube(1, 20.0, 512).unwrap();
    let ham = HamiltonianSpec::dirac1d(grid.clone(), 1.0, 1.0, 0.0);
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut psi = gaussian_spinor(&grid, 1.0, s, s);
    let x0 = centre(&psi);
    for _ in 0..100 {
        psi = dirac_step_1d(&psi, &ham, 0.01).unwrap();
    }
    let drift = centre(&psi) - x0;
    assert!((drift - 1.0).abs() <= grid.spacing(0), "{drift}");
    assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
}

#[test]
fn upper_component_current_oscillates_at_twice_the_rest_energy() {
    let (mass, dt, steps) = (5.0, 0.005, 1000);
    let grid = GridSpec::cube(1, 30.0, 256).unwrap();
    let ham = HamiltonianSpec::dirac1d(grid.clone(), 1.0, 1.0, mass);
    // A small momentum kick makes the total current nonzero.
    let mut psi = SpinorField::from_fn(grid.clone(), 2, |q| {
        let g = (-q[0] * q[0] / 36.0).exp() * Complex64::from_polar(1.0, 0.2 * q[0]);
        vec![g, Complex64::new(0.0, 0.0)]
    })
    .unwrap();
    psi.normalize().unwrap();
    let h = grid.cell_volume();
    let mut total = Vec::with_capacity(steps);
    for _ in 0..steps {
        psi = dirac_step_1d(&psi, &ham, dt).unwrap();
        let cur = dirac_current(&psi, &[sigma_x()], 1.0).unwrap();
        total.push(cur.flux[0].iter().sum::<f64>() * h);
    }
    let mean = total.iter().sum::<f64>() / steps as f64;
    let crossings: Vec<f64> = total
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - mean) * (w[1] - mean) < 0.0)
        .map(|(i, w)| (i as f64 + (w[0] - mean) / (w[0] - w[1])) * dt)
        .collect();
    let half_period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
    let omega = std::f64::consts::PI / half_period;
    // Mode energy at the kick wavenumber.
    let expected = 2.0 * (mass * mass + 0.04f64).sqrt();
    assert!((omega - expected).abs() < 0.02 * expected, "{omega} vs {expected}");
}

#[test]
fn free_gaussian_split_step_matches_the_closed_form() {
    let s = scenario_by_name("free_gaussian", &ScenarioParams::new()).unwrap();
    let grid = GridSpec::cube(1, 20.0, 1024).unwrap();
    let stepper = SplitStepper::new(&HamiltonianSpec::for_scenario(s.as_ref(), &grid).unwrap(), 1e-3).unwrap();
    let mut psi = s.initial_field(&grid).unwrap();
    for _ in 0..1000 {
        stepper.step(&mut psi).unwrap();
    }
    let err = (0..psi.n_points()).map(|p| (psi.at(p)[0] - s.psi(1.0, &grid.point(p))[0]).norm()).fold(0.0f64, f64::max);
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn grid_provider_keeps_norm_and_follows_closed_form_trajectories() {
    let s = scenario_by_name("coherent_state", &ScenarioParams::new()).unwrap();
    let grid = s.grid();
    let run = PdeRun::from_scenario(s.as_ref(), &grid, 0.01, 1.0).unwrap();
    let drift = run.norms().iter().map(|n| (n - run.norms()[0]).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-8, "{drift}");
    let p = GridProvider::from_run(&run, ConfigSpace::euclidean(1)).unwrap();
    let exact = ScenarioProvider::new(s.clone());
    let cfg = IntegratorConfig { escape_radius: 0.9 * grid.half_width(), ..Default::default() };
    for q0 in [-1.0, 0.0, 0.7] {
        let a = integrate(&p, &ConfigSpace::euclidean(1), &[q0], 1.0, &cfg).unwrap();
        let b = integrate(&exact, &ConfigSpace::euclidean(1), &[q0], 1.0, &cfg).unwrap();
        assert!((a.final_sample().q[0] - b.final_sample().q[0]).abs() < 1e-4);
    }
}
