use num_complex::Complex64;

use super::{HamiltonianKind, HamiltonianSpec, LocalStep};
use crate::error::{Error, Result};
use crate::grid::{Spectral, SpinorField};

type C = Complex64;

/// Spectral stepper for `iħ ∂_t ψ = (-iħc σ_x ∂ + mc² σ_z + V) ψ` in one
/// dimension.
///
/// The free operator, mass term included, is diagonal per Fourier mode and is
/// applied through its exact 2×2 exponential; `V` is Strang-split around it.
#[derive(Debug, Clone)]
pub struct DiracStepper {
    spec: HamiltonianSpec,
    dt: f64,
    spectral: Spectral,
    half_local: LocalStep,
    /// Row-major 2×2 propagator per mode, scaled by `1/N`.
    modes: Vec<[C; 4]>,
}

/// `exp(-i τ (hx σ_x + hz σ_z))` in row-major order.
pub(crate) fn free_mode_propagator(hx: f64, hz: f64, tau: f64) -> [C; 4] {
    let e = (hx * hx + hz * hz).sqrt();
    if e == 0.0 {
        return [C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)];
    }
    let (s, c) = (e * tau).sin_cos();
    let mi = -C::i() * s;
    let (ux, uz) = (hx / e, hz / e);
    [c + mi * uz, mi * ux, mi * ux, c - mi * uz]
}

impl DiracStepper {
    pub fn new(spec: &HamiltonianSpec, dt: f64) -> Result<Self> {
        if spec.kind != HamiltonianKind::Dirac1d {
            return Err(Error::InvalidInput("the Dirac stepper needs a dirac1d operator".into()));
        }
        spec.validate()?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidInput(format!("time step must be finite and nonzero, got {dt}")));
        }
        let spectral = Spectral::new(&spec.grid)?;
        let n = spec.grid.points[0];
        let mc2 = spec.dirac_mass * spec.c * spec.c;
        let modes = spectral
            .wavenumbers(0)
            .iter()
            .map(|&k| {
                let mut u = free_mode_propagator(spec.hbar * spec.c * k, mc2, dt / spec.hbar);
                u.iter_mut().for_each(|z| *z /= n as f64);
                u
            })
            .collect();
        Ok(Self { spec: spec.clone(), dt, spectral, half_local: LocalStep::new(spec, 0.5 * dt), modes })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut SpinorField) -> Result<()> {
        if psi.grid != self.spec.grid || psi.components != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: psi.components });
        }
        self.half_local.apply(psi);
        let n = psi.n_points();
        let mut line = Vec::new();
        let (up, lo) = psi.data.split_at_mut(n);
        self.spectral.transform_axis(up, 0, false, &mut line);
        self.spectral.transform_axis(lo, 0, false, &mut line);
        for ((a, b), u) in up.iter_mut().zip(lo.iter_mut()).zip(&self.modes) {
            let (x, y) = (*a, *b);
            *a = u[0] * x + u[1] * y;
            *b = u[2] * x + u[3] * y;
        }
        self.spectral.transform_axis(up, 0, true, &mut line);
        self.spectral.transform_axis(lo, 0, true, &mut line);
        self.half_local.apply(psi);
        Ok(())
    }
}

/// Advances a two-component spinor by one step of length `dt`.
pub fn dirac_step_1d(psi: &SpinorField, ham: &HamiltonianSpec, dt: f64) -> Result<SpinorField> {
    let stepper = DiracStepper::new(ham, dt)?;
    let mut out = psi.clone();
    stepper.step(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_matches_two_level_exponential() {
        let grid = GridSpec::cube(1, PI, 32).unwrap();
        let ham = HamiltonianSpec::dirac1d(grid.clone(), 1.0, 1.0, 0.7);
        let k = 2.0;
        let spinor = [C::new(0.6, 0.1), C::new(-0.3, 0.5)];
        let psi = SpinorField::from_fn(grid.clone(), 2, |q| {
            let w = (C::i() * k * q[0]).exp();
            vec![spinor[0] * w, spinor[1] * w]
        })
        .unwrap();
        let out = dirac_step_1d(&psi, &ham, 0.37).unwrap();
        let u = free_mode_propagator(k, 0.7, 0.37);
        for (p, q) in grid.points_iter().enumerate() {
            let w = (C::i() * k * q[0]).exp();
            let a = (u[0] * spinor[0] + u[1] * spinor[1]) * w;
            let b = (u[2] * spinor[0] + u[3] * spinor[1]) * w;
            assert!((out.data[p] - a).norm() < 1e-13);
            assert!((out.data[32 + p] - b).norm() < 1e-13);
        }
        assert!((out.norm_sq() - psi.norm_sq()).abs() < 1e-12 * psi.norm_sq());
    }

    #[test]
    fn rejects_wrong_kind() {
        let grid = GridSpec::cube(1, PI, 32).unwrap();
        assert!(DiracStepper::new(&HamiltonianSpec::schrodinger(grid), 0.1).is_err());
    }
}
