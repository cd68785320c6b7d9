//! Wavefunction propagation and providers built from propagated or
//! closed-form wavefunctions.

mod dirac;
pub mod io;
mod provider;
mod schrodinger;
pub mod spline;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Spectral, SpinorField};
use crate::scenario::{Dynamics, Scenario};

pub use dirac::{dirac_step_1d, DiracStepper};
pub use provider::{build_provider, GridProvider, PdeRun, ProviderSource, ScenarioProvider};
pub use schrodinger::{split_step_schrodinger, SplitStepper};

type C = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianKind {
    Schrodinger,
    Pauli,
    Dirac1d,
}

/// Potential energy on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// `V(q)` times the identity on spin space.
    Scalar(Vec<f64>),
    /// One Hermitian `k × k` matrix per node.
    Matrix(Vec<DMatrix<C>>),
}

/// Everything the steppers need to know about `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub grid: GridSpec,
    pub components: usize,
    pub hbar: f64,
    pub masses: Vec<f64>,
    pub charges_over_c_hbar: Vec<f64>,
    pub potential: Potential,
    /// `vector_potential[i][p]` is `A_i` at node `p`.
    pub vector_potential: Option<Vec<Vec<f64>>>,
    /// Field `B` entering `-B·σ` (Pauli only), one array per Cartesian component.
    pub spin_coupling: Option<[Vec<f64>; 3]>,
    pub dirac_mass: f64,
    pub c: f64,
    /// Refuse any vector potential that cannot be treated exactly in the
    /// kinetic step instead of approximating it.
    pub exact_kinetic: bool,
}

impl HamiltonianSpec {
    /// Scalar Schrödinger operator with `ħ = 1`, unit masses and no fields.
    pub fn schrodinger(grid: GridSpec) -> Self {
        let d = grid.dim();
        Self {
            kind: HamiltonianKind::Schrodinger,
            grid,
            components: 1,
            hbar: 1.0,
            masses: vec![1.0; d],
            charges_over_c_hbar: vec![0.0; d],
            potential: Potential::Zero,
            vector_potential: None,
            spin_coupling: None,
            dirac_mass: 0.0,
            c: 1.0,
            exact_kinetic: false,
        }
    }

    /// Two-component Pauli operator with field `B`.
    pub fn pauli(grid: GridSpec, b: [Vec<f64>; 3]) -> Self {
        Self { kind: HamiltonianKind::Pauli, components: 2, spin_coupling: Some(b), ..Self::schrodinger(grid) }
    }

    /// One-dimensional Dirac operator `-iħc σ_x ∂ + mc² σ_z`.
    pub fn dirac1d(grid: GridSpec, hbar: f64, c: f64, mass: f64) -> Self {
        Self { kind: HamiltonianKind::Dirac1d, components: 2, hbar, c, dirac_mass: mass, ..Self::schrodinger(grid) }
    }

    /// Operator matching a scenario's dynamics, with its potential sampled on `grid`.
    pub fn for_scenario(s: &dyn Scenario, grid: &GridSpec) -> Result<Self> {
        if grid.dim() != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), found: grid.dim() });
        }
        let v: Vec<f64> = grid.points_iter().map(|q| s.potential(&q)).collect();
        let potential = if v.iter().all(|&x| x == 0.0) { Potential::Zero } else { Potential::Scalar(v) };
        let mut spec = match s.dynamics() {
            Dynamics::Schrodinger(coupling) => {
                let mut h = Self::schrodinger(grid.clone());
                h.components = s.components();
                h.hbar = coupling.hbar;
                h.masses = coupling.masses;
                h.charges_over_c_hbar = coupling.charges_over_c_hbar;
                h
            }
            Dynamics::Dirac { hbar, c, mass } => Self::dirac1d(grid.clone(), hbar, c, mass),
        };
        spec.potential = potential;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_potential_fn<F: Fn(&[f64]) -> f64>(mut self, f: F) -> Self {
        self.potential = Potential::Scalar(self.grid.points_iter().map(|q| f(&q)).collect());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let d = self.grid.dim();
        if self.masses.len() != d || self.charges_over_c_hbar.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.masses.len() });
        }
        if self.masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidInput("masses must be positive".into()));
        }
        if !(self.hbar > 0.0) || !(self.c > 0.0) {
            return Err(Error::InvalidInput("ħ and c must be positive".into()));
        }
        match &self.potential {
            Potential::Zero => {}
            Potential::Scalar(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: v.len() });
                }
            }
            Potential::Matrix(ms) => {
                if ms.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: ms.len() });
                }
                for (p, m) in ms.iter().enumerate() {
                    if m.nrows() != self.components || m.ncols() != self.components {
                        return Err(Error::DimensionMismatch { expected: self.components, found: m.nrows() });
                    }
                    let dev = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                    if dev > HERMITIAN_TOL {
                        return Err(Error::InvalidInput(format!(
                            "potential not Hermitian at node {p} (deviation {dev:e})"
                        )));
                    }
                }
            }
        }
        if let Some(a) = &self.vector_potential {
            if a.len() != d || a.iter().any(|ai| ai.len() != n) {
                return Err(Error::DimensionMismatch { expected: d, found: a.len() });
            }
        }
        if let Some(b) = &self.spin_coupling {
            if self.kind != HamiltonianKind::Pauli {
                return Err(Error::InvalidInput("spin coupling needs a Pauli operator".into()));
            }
            if b.iter().any(|bi| bi.len() != n) {
                return Err(Error::DimensionMismatch { expected: n, found: b[0].len() });
            }
        }
        match self.kind {
            HamiltonianKind::Pauli if self.components != 2 => {
                Err(Error::DimensionMismatch { expected: 2, found: self.components })
            }
            HamiltonianKind::Dirac1d if d != 1 => {
                Err(Error::UnsupportedField(format!("the Dirac stepper is one-dimensional, grid has {d} axes")))
            }
            HamiltonianKind::Dirac1d if self.components != 2 => {
                Err(Error::DimensionMismatch { expected: 2, found: self.components })
            }
            _ => Ok(()),
        }
    }

    /// Local Hermitian matrix at node `p` (potential plus spin term).
    pub(crate) fn local_matrix(&self, p: usize) -> DMatrix<C> {
        let k = self.components;
        let mut m = match &self.potential {
            Potential::Zero => DMatrix::zeros(k, k),
            Potential::Scalar(v) => DMatrix::identity(k, k) * C::new(v[p], 0.0),
            Potential::Matrix(ms) => ms[p].clone(),
        };
        if let Some(b) = &self.spin_coupling {
            let (bx, by, bz) = (b[0][p], b[1][p], b[2][p]);
            m[(0, 0)] -= C::new(bz, 0.0);
            m[(1, 1)] += C::new(bz, 0.0);
            m[(0, 1)] -= C::new(bx, -by);
            m[(1, 0)] -= C::new(bx, by);
        }
        m
    }

    pub(crate) fn has_local_term(&self) -> bool {
        !matches!(self.potential, Potential::Zero) || self.spin_coupling.is_some()
    }

    /// Applies `H` to `psi`.
    pub fn apply(&self, psi: &SpinorField) -> Result<SpinorField> {
        self.validate()?;
        if psi.grid != self.grid || psi.components != self.components {
            return Err(Error::DimensionMismatch { expected: self.components, found: psi.components });
        }
        let sp = Spectral::new(&self.grid)?;
        let n = self.grid.len();
        let mut out = SpinorField::zeros(self.grid.clone(), self.components);
        match self.kind {
            HamiltonianKind::Schrodinger | HamiltonianKind::Pauli => {
                let shifts = self.axis_shifts()?;
                let mut line = Vec::new();
                for s in 0..self.components {
                    for axis in 0..self.grid.dim() {
                        let mut w = psi.component(s).to_vec();
                        sp.transform_axis(&mut w, axis, false, &mut line);
                        let na = self.grid.points[axis];
                        let coef = self.hbar * self.hbar / (2.0 * self.masses[axis]);
                        for (p, z) in w.iter_mut().enumerate() {
                            let kk = sp.k_at(p, axis);
                            let a = shifts.as_ref().map_or(0.0, |sh| sh[axis][p]);
                            *z *= coef * (kk - a).powi(2) / na as f64;
                        }
                        sp.transform_axis(&mut w, axis, true, &mut line);
                        for (o, z) in out.component_mut(s).iter_mut().zip(&w) {
                            *o += z;
                        }
                    }
                }
            }
            HamiltonianKind::Dirac1d => {
                let hc = self.hbar * self.c;
                let mc2 = self.dirac_mass * self.c * self.c;
                let d0 = sp.derivative(psi.component(0), 0);
                let d1 = sp.derivative(psi.component(1), 0);
                let (u, l) = (psi.component(0), psi.component(1));
                for p in 0..n {
                    out.data[p] = -C::i() * hc * d1[p] + mc2 * u[p];
                    out.data[n + p] = -C::i() * hc * d0[p] - mc2 * l[p];
                }
            }
        }
        if self.has_local_term() {
            for p in 0..n {
                let m = self.local_matrix(p);
                let v = psi.at(p);
                for r in 0..self.components {
                    let mut acc = C::new(0.0, 0.0);
                    for (c, vc) in v.iter().enumerate() {
                        acc += m[(r, c)] * vc;
                    }
                    out.data[r * n + p] += acc;
                }
            }
        }
        Ok(out)
    }

    /// `κ_i A_i` per axis and node, or `None` without a vector potential.
    ///
    /// Each `A_i` must not depend on `q_i`; the kinetic factor along axis `i`
    /// is then diagonal after a Fourier transform along that axis alone.
    pub(crate) fn axis_shifts(&self) -> Result<Option<Vec<Vec<f64>>>> {
        let Some(a) = &self.vector_potential else {
            return Ok(None);
        };
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.dim());
        for (axis, ai) in a.iter().enumerate() {
            let scale = ai.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
            for p in 0..g.len() {
                let mut idx = g.unravel(p);
                idx[axis] = 0;
                if (ai[p] - ai[g.ravel(&idx)]).abs() > 1e-12 * scale {
                    return Err(Error::UnsupportedField(format!(
                        "A_{axis} varies along axis {axis}; only fields with ∂_i A_i ≡ 0 per axis are propagated exactly{}",
                        if self.exact_kinetic { " (exact kinetic treatment requested)" } else { "" }
                    )));
                }
            }
            out.push(ai.iter().map(|x| self.charges_over_c_hbar[axis] * x).collect());
        }
        Ok(Some(out))
    }
}

/// `exp(-i τ M)` for a Hermitian matrix `M`.
pub(crate) fn hermitian_exp(m: &DMatrix<C>, tau: f64) -> DMatrix<C> {
    let k = m.nrows();
    if k == 1 {
        return DMatrix::from_element(1, 1, (-C::i() * tau * m[(0, 0)].re).exp());
    }
    if k == 2 {
        let a = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
        let bz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
        let bx = m[(0, 1)].re;
        let by = -m[(0, 1)].im;
        let b = (bx * bx + by * by + bz * bz).sqrt();
        let phase = (-C::i() * tau * a).exp();
        let (s, c) = (tau * b).sin_cos();
        let (ux, uy, uz) = if b > 0.0 { (bx / b, by / b, bz / b) } else { (0.0, 0.0, 0.0) };
        let mi = -C::i() * s;
        return DMatrix::from_row_slice(
            2,
            2,
            &[phase * (c + mi * uz), phase * mi * C::new(ux, -uy), phase * mi * C::new(ux, uy), phase * (c - mi * uz)],
        );
    }
    let eig = m.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-C::i() * tau * l).exp()));
    v * d * v.adjoint()
}

/// Half-step local propagators `exp(-i M_p τ/ħ)` for every node.
#[derive(Debug, Clone)]
pub(crate) enum LocalStep {
    None,
    Scalar(Vec<C>),
    Matrix(Vec<DMatrix<C>>),
}

impl LocalStep {
    pub(crate) fn new(ham: &HamiltonianSpec, tau: f64) -> Self {
        if !ham.has_local_term() {
            return LocalStep::None;
        }
        let n = ham.grid.len();
        match (&ham.potential, &ham.spin_coupling) {
            (Potential::Scalar(v), None) => {
                LocalStep::Scalar(v.iter().map(|&x| (-C::i() * x * tau / ham.hbar).exp()).collect())
            }
            _ => LocalStep::Matrix((0..n).map(|p| hermitian_exp(&ham.local_matrix(p), tau / ham.hbar)).collect()),
        }
    }

    pub(crate) fn apply(&self, psi: &mut SpinorField) {
        let n = psi.n_points();
        match self {
            LocalStep::None => {}
            LocalStep::Scalar(ph) => {
                for s in 0..psi.components {
                    for (z, f) in psi.component_mut(s).iter_mut().zip(ph) {
                        *z *= f;
                    }
                }
            }
            LocalStep::Matrix(ms) => {
                let k = psi.components;
                let mut v = vec![C::new(0.0, 0.0); k];
                for (p, m) in ms.iter().enumerate() {
                    for (s, vs) in v.iter_mut().enumerate() {
                        *vs = psi.data[s * n + p];
                    }
                    for r in 0..k {
                        let mut acc = C::new(0.0, 0.0);
                        for (c, vc) in v.iter().enumerate() {
                            acc += m[(r, c)] * vc;
                        }
                        psi.data[r * n + p] = acc;
                    }
                }
            }
        }
    }
}
