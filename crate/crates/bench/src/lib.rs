//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use bohm_core::propagate::SplitStepper;
use bohm_core::{
    scenario_by_name, ConfigSpace, GridSpec, HamiltonianSpec, Scenario, ScenarioParams, ScenarioProvider, SpinorField,
};

pub fn scenario(name: &str) -> Arc<dyn Scenario> {
    scenario_by_name(name, &ScenarioParams::new()).expect("built-in scenario")
}

/// Closed-form provider and its configuration space.
pub fn provider(name: &str) -> (ScenarioProvider, ConfigSpace) {
    let s = scenario(name);
    let space = s.config_space();
    (ScenarioProvider::new(s), space)
}

/// Free Gaussian initial data and stepper on a one-dimensional grid.
pub fn free_split_step(points: usize, dt: f64) -> (SpinorField, SplitStepper) {
    let s = scenario("free_gaussian");
    let grid = GridSpec::cube(1, 20.0, points).expect("valid grid");
    let ham = HamiltonianSpec::for_scenario(s.as_ref(), &grid).expect("operator");
    (s.initial_field(&grid).expect("field"), SplitStepper::new(&ham, dt).expect("stepper"))
}
