//! Particle trajectories guided by probability currents.
//!
//! The crate integrates the guidance equation `dQ/dt = J / j⁰` for a current
//! `j = (j⁰, J)` supplied by a [`CurrentProvider`], propagates Schrödinger,
//! Pauli and one-dimensional Dirac wavefunctions, ships closed-form scenarios
//! used as oracles, and checks equivariance of the `|ψ|²` distribution and the
//! global-existence condition integrals numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod current;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod ode;
pub mod propagate;
pub mod quadrature;
pub mod scenario;
pub mod trajectory;
pub mod verify;

pub use current::{
    dirac_current, divergence_residual, schrodinger_current, time_reverse, validate_axioms, velocity, AxiomCheck,
    AxiomReport, CurrentField, CurrentProvider, CurrentSample, NodePolicy, SchrodingerCoupling, TimeReversed,
    TimeWindow,
};
pub use error::{Axiom, Error, Result};
pub use geometry::{singular_distance, ConfigSpace, SingularDistance, SingularSubspace};
pub use grid::{GridSpec, SpinorField};
pub use propagate::{
    build_provider, dirac_step_1d, split_step_schrodinger, GridProvider, HamiltonianKind, HamiltonianSpec,
    ProviderSource, ScenarioProvider,
};
pub use scenario::{scenario_by_name, scenario_eval, Scenario, ScenarioParams};
pub use trajectory::{
    diag_log_density_variation, diag_path_variation, diag_singular_variation, integrate, integrate_from,
    integrate_s_parameterized, reverse_roundtrip, DiagnosticRecord, IntegratorConfig, Status, Trajectory,
};
pub use verify::{
    condition_integrals, equivariance_test, expected_distance_check, hardy_check, pushforward, sample_initial,
    transport_check, ComparisonResult, ConditionReport, ConditionSpec, Ensemble,
};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
