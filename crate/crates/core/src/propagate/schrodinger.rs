use num_complex::Complex64;

use super::{HamiltonianKind, HamiltonianSpec, LocalStep};
use crate::error::{Error, Result};
use crate::grid::{Spectral, SpinorField};

type C = Complex64;

/// Strang-split Schrödinger / Pauli stepper with everything precomputed.
///
/// One step is `exp(-iVτ/2) · K · exp(-iVτ/2)` where `K` is the kinetic
/// propagator, applied axis by axis in Fourier space. With a vector potential
/// the kinetic symbol along axis `i` is `ħ²(k_i − κ_i A_i)²/2m_i`; `A_i` may
/// depend on the other coordinates, and then the axis factors are composed
/// symmetrically.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    spec: HamiltonianSpec,
    dt: f64,
    spectral: Spectral,
    half_local: LocalStep,
    /// `(axis, multiplier)` pairs applied in order; multipliers include the
    /// `1/N_axis` of the unnormalised inverse transform.
    kinetic: Vec<(usize, Vec<C>)>,
}

impl SplitStepper {
    pub fn new(spec: &HamiltonianSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !matches!(spec.kind, HamiltonianKind::Schrodinger | HamiltonianKind::Pauli) {
            return Err(Error::InvalidInput("split-step Schrödinger needs a Schrödinger or Pauli operator".into()));
        }
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidInput(format!("time step must be finite and nonzero, got {dt}")));
        }
        let spectral = Spectral::new(&spec.grid)?;
        let shifts = spec.axis_shifts()?;
        let d = spec.grid.dim();
        let uniform = shifts
            .as_ref()
            .is_none_or(|sh| sh.iter().all(|a| a.iter().all(|&x| (x - a[0]).abs() <= 1e-14 * a[0].abs().max(1.0))));
        let factor = |axis: usize, tau: f64| -> Vec<C> {
            let n_axis = spec.grid.points[axis] as f64;
            let coef = spec.hbar / (2.0 * spec.masses[axis]);
            (0..spec.grid.len())
                .map(|p| {
                    let k = spectral.k_at(p, axis);
                    let a = shifts.as_ref().map_or(0.0, |sh| sh[axis][p]);
                    (-C::i() * coef * (k - a).powi(2) * tau).exp() / n_axis
                })
                .collect()
        };
        let kinetic = if uniform || d == 1 {
            (0..d).map(|a| (a, factor(a, dt))).collect()
        } else {
            let mut seq: Vec<(usize, Vec<C>)> = (0..d - 1).map(|a| (a, factor(a, 0.5 * dt))).collect();
            seq.push((d - 1, factor(d - 1, dt)));
            seq.extend((0..d - 1).rev().map(|a| (a, factor(a, 0.5 * dt))));
            seq
        };
        Ok(Self { spec: spec.clone(), dt, spectral, half_local: LocalStep::new(spec, 0.5 * dt), kinetic })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn step(&self, psi: &mut SpinorField) -> Result<()> {
        if psi.grid != self.spec.grid || psi.components != self.spec.components {
            return Err(Error::DimensionMismatch { expected: self.spec.components, found: psi.components });
        }
        self.half_local.apply(psi);
        let mut line = Vec::new();
        for s in 0..psi.components {
            let comp = psi.component_mut(s);
            for (axis, mult) in &self.kinetic {
                self.spectral.transform_axis(comp, *axis, false, &mut line);
                for (z, m) in comp.iter_mut().zip(mult) {
                    *z *= m;
                }
                self.spectral.transform_axis(comp, *axis, true, &mut line);
            }
        }
        self.half_local.apply(psi);
        Ok(())
    }
}

/// Advances `psi` by one Strang step of length `dt`.
pub fn split_step_schrodinger(psi: &SpinorField, ham: &HamiltonianSpec, dt: f64) -> Result<SpinorField> {
    let stepper = SplitStepper::new(ham, dt)?;
    let mut out = psi.clone();
    stepper.step(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::scenario::{scenario_by_name, ScenarioParams};
    use std::f64::consts::PI;

    #[test]
    fn free_gaussian_matches_closed_form() {
        let s = scenario_by_name("free_gaussian", &ScenarioParams::new()).unwrap();
        let grid = GridSpec::cube(1, 40.0, 1024).unwrap();
        let ham = HamiltonianSpec::for_scenario(s.as_ref(), &grid).unwrap();
        let st = SplitStepper::new(&ham, 1e-3).unwrap();
        let mut psi = s.initial_field(&grid).unwrap();
        for _ in 0..1000 {
            st.step(&mut psi).unwrap();
        }
        let err =
            grid.points_iter().enumerate().map(|(p, q)| (psi.data[p] - s.psi(1.0, &q)[0]).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "max error {err:e}");
    }

    #[test]
    fn constant_potential_is_a_global_phase() {
        let s = scenario_by_name("free_gaussian", &ScenarioParams::new()).unwrap();
        let grid = GridSpec::cube(1, 30.0, 512).unwrap();
        let free = HamiltonianSpec::for_scenario(s.as_ref(), &grid).unwrap();
        let shifted = free.clone().with_potential_fn(|_| 0.7);
        let psi0 = s.initial_field(&grid).unwrap();
        let (a, b) = (SplitStepper::new(&free, 0.01).unwrap(), SplitStepper::new(&shifted, 0.01).unwrap());
        let (mut pa, mut pb) = (psi0.clone(), psi0);
        for _ in 0..50 {
            a.step(&mut pa).unwrap();
            b.step(&mut pb).unwrap();
        }
        let phase = (-C::i() * 0.7 * 0.5).exp();
        for (x, y) in pa.data.iter().zip(&pb.data) {
            assert!((x * phase - y).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_is_exact_and_norm_is_kept() {
        let grid = GridSpec::cube(1, PI, 64).unwrap();
        let ham = HamiltonianSpec::schrodinger(grid.clone());
        let k = 3.0;
        let mut psi = SpinorField::from_fn(grid.clone(), 1, |q| vec![(C::i() * k * q[0]).exp()]).unwrap();
        let n0 = psi.norm_sq();
        let st = SplitStepper::new(&ham, 0.1).unwrap();
        for _ in 0..10 {
            st.step(&mut psi).unwrap();
        }
        for (p, q) in grid.points_iter().enumerate() {
            let want = (C::i() * (k * q[0] - 0.5 * k * k * 1.0)).exp();
            assert!((psi.data[p] - want).norm() < 1e-12);
        }
        assert!((psi.norm_sq() - n0).abs() <= 10.0 * 1e-12 * n0);
    }

    #[test]
    fn oscillator_ground_state_is_stationary() {
        let s = scenario_by_name("harmonic_ground", &ScenarioParams::new()).unwrap();
        let grid = s.grid();
        let ham = HamiltonianSpec::for_scenario(s.as_ref(), &grid).unwrap();
        let st = SplitStepper::new(&ham, 1e-4).unwrap();
        let mut psi = s.initial_field(&grid).unwrap();
        let m0: Vec<f64> = psi.data.iter().map(|z| z.norm()).collect();
        for _ in 0..1000 {
            st.step(&mut psi).unwrap();
        }
        let dev = psi.data.iter().zip(&m0).map(|(z, m)| (z.norm() - m).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "modulus drift {dev:e}");
    }

    #[test]
    fn uniform_vector_potential_shifts_momentum() {
        let grid = GridSpec::cube(1, PI, 32).unwrap();
        let mut ham = HamiltonianSpec::schrodinger(grid.clone());
        ham.charges_over_c_hbar = vec![1.0];
        ham.vector_potential = Some(vec![vec![2.0; 32]]);
        let mut psi = SpinorField::from_fn(grid.clone(), 1, |q| vec![(C::i() * 2.0 * q[0]).exp()]).unwrap();
        let before = psi.clone();
        SplitStepper::new(&ham, 0.3).unwrap().step(&mut psi).unwrap();
        for (a, b) in psi.data.iter().zip(&before.data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn vector_potential_varying_along_its_axis_is_unsupported() {
        let grid = GridSpec::cube(1, PI, 32).unwrap();
        let mut ham = HamiltonianSpec::schrodinger(grid.clone());
        ham.charges_over_c_hbar = vec![1.0];
        ham.vector_potential = Some(vec![grid.points_iter().map(|q| q[0]).collect()]);
        ham.exact_kinetic = true;
        assert!(matches!(SplitStepper::new(&ham, 0.1), Err(Error::UnsupportedField(_))));
    }

    #[test]
    fn pauli_uniform_field_precesses_spin() {
        let grid = GridSpec::cube(1, PI, 16).unwrap();
        let b = 0.8;
        let ham = HamiltonianSpec::pauli(grid.clone(), [vec![0.0; 16], vec![0.0; 16], vec![b; 16]]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut psi = SpinorField::from_fn(grid.clone(), 2, |_| vec![C::new(r, 0.0), C::new(r, 0.0)]).unwrap();
        let st = SplitStepper::new(&ham, 0.05).unwrap();
        for _ in 0..20 {
            st.step(&mut psi).unwrap();
        }
        let t = 1.0;
        let want_up = C::new(r, 0.0) * (C::i() * b * t).exp();
        let want_dn = C::new(r, 0.0) * (-C::i() * b * t).exp();
        assert!((psi.data[3] - want_up).norm() < 1e-12);
        assert!((psi.data[16 + 3] - want_dn).norm() < 1e-12);
    }
}
