use std::sync::Arc;

use num_complex::Complex64;

use super::spline::{prefilter, Stencil};
use super::{DiracStepper, HamiltonianKind, HamiltonianSpec, SplitStepper};
use crate::current::{
    dirac_sample, schrodinger_sample, sigma_x, validate_axioms, AxiomCheck, CurrentProvider, CurrentSample,
    SchrodingerCoupling, TimeWindow,
};
use crate::error::{Error, Result};
use crate::geometry::ConfigSpace;
use crate::grid::{GridSpec, Spectral, SpinorField};
use crate::scenario::Scenario;

type C = Complex64;

/// Provider whose samples are a scenario's exact current.
pub struct ScenarioProvider {
    scenario: Arc<dyn Scenario>,
    support: GridSpec,
    space: ConfigSpace,
    scale: f64,
}

impl std::fmt::Debug for ScenarioProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioProvider").field("scenario", &self.scenario.name()).finish()
    }
}

impl ScenarioProvider {
    /// Wraps a scenario without running the axiom suite; see [`build_provider`].
    pub fn new(scenario: Arc<dyn Scenario>) -> Self {
        Self::with_support(scenario.clone(), scenario.grid())
    }

    pub fn with_support(scenario: Arc<dyn Scenario>, support: GridSpec) -> Self {
        let scale = support.points_iter().map(|q| scenario.current(0.0, &q).j0).fold(0.0, f64::max);
        let space = scenario.config_space();
        Self { scenario, support, space, scale }
    }

    pub fn with_space(mut self, space: ConfigSpace) -> Self {
        self.space = space;
        self
    }

    pub fn scenario(&self) -> &Arc<dyn Scenario> {
        &self.scenario
    }
}

impl CurrentProvider for ScenarioProvider {
    fn dim(&self) -> usize {
        self.scenario.dim()
    }

    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
        self.scenario.current(t, q)
    }

    fn window(&self) -> TimeWindow {
        self.scenario.window()
    }

    fn density_scale(&self) -> f64 {
        self.scale
    }

    fn support(&self) -> &GridSpec {
        &self.support
    }

    fn config_space(&self) -> &ConfigSpace {
        &self.space
    }
}

/// A propagated wavefunction with every time slice kept.
#[derive(Debug, Clone)]
pub struct PdeRun {
    pub ham: HamiltonianSpec,
    pub dt: f64,
    pub slices: Vec<SpinorField>,
}

impl PdeRun {
    /// Propagates `initial` for `steps` steps of `dt` and stores every slice.
    pub fn execute(initial: SpinorField, ham: &HamiltonianSpec, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("a run needs at least one step".into()));
        }
        let mut psi = initial;
        let mut slices = Vec::with_capacity(steps + 1);
        slices.push(psi.clone());
        match ham.kind {
            HamiltonianKind::Dirac1d => {
                let st = DiracStepper::new(ham, dt)?;
                for _ in 0..steps {
                    st.step(&mut psi)?;
                    slices.push(psi.clone());
                }
            }
            _ => {
                let st = SplitStepper::new(ham, dt)?;
                for _ in 0..steps {
                    st.step(&mut psi)?;
                    slices.push(psi.clone());
                }
            }
        }
        Ok(Self { ham: ham.clone(), dt, slices })
    }

    /// Propagates a scenario's initial data over `[0, horizon]`.
    pub fn from_scenario(s: &dyn Scenario, grid: &GridSpec, dt: f64, horizon: f64) -> Result<Self> {
        let ham = HamiltonianSpec::for_scenario(s, grid)?;
        let steps = (horizon / dt).round() as usize;
        if ((steps as f64) * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::InvalidInput(format!("horizon {horizon} is not a multiple of dt {dt}")));
        }
        Self::execute(s.initial_field(grid)?, &ham, dt, steps)
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.slices.len() - 1) as f64
    }

    pub fn norms(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.norm_sq()).collect()
    }
}

#[derive(Debug, Clone)]
enum Physics {
    Schrodinger { coupling: SchrodingerCoupling, shifts: Option<Vec<Vec<C>>> },
    Dirac { c: f64 },
}

/// Spline coefficients of `ψ` and `∂_t ψ` at one stored time.
#[derive(Debug, Clone)]
struct Slice {
    psi: Vec<Vec<C>>,
    dpsi: Vec<Vec<C>>,
}

/// Current of a propagated wavefunction.
///
/// `ψ` is interpolated by periodic cubic B-splines in space and by cubic
/// Hermite polynomials in time, using `∂_t ψ = -(i/ħ) H ψ` at every stored
/// slice. The current is formed from the interpolated spinor, so the Dirac
/// bound `|J| ≤ c j⁰` holds exactly for the interpolant.
#[derive(Debug, Clone)]
pub struct GridProvider {
    grid: GridSpec,
    space: ConfigSpace,
    physics: Physics,
    components: usize,
    dt: f64,
    slices: Vec<Slice>,
    scale: f64,
}

impl GridProvider {
    pub fn from_run(run: &PdeRun, space: ConfigSpace) -> Result<Self> {
        let ham = &run.ham;
        let grid = ham.grid.clone();
        if space.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: space.dim() });
        }
        let spectral = Spectral::new(&grid)?;
        let physics = match ham.kind {
            HamiltonianKind::Dirac1d => Physics::Dirac { c: ham.c },
            _ => {
                let shifts = ham.vector_potential.as_ref().map(|a| {
                    a.iter()
                        .map(|ai| prefilter(&spectral, &ai.iter().map(|&x| C::new(x, 0.0)).collect::<Vec<_>>()))
                        .collect()
                });
                Physics::Schrodinger {
                    coupling: SchrodingerCoupling {
                        hbar: ham.hbar,
                        masses: ham.masses.clone(),
                        charges_over_c_hbar: ham.charges_over_c_hbar.clone(),
                    },
                    shifts,
                }
            }
        };
        let k = ham.components;
        let mut slices = Vec::with_capacity(run.slices.len());
        for psi in &run.slices {
            let hpsi = ham.apply(psi)?;
            let factor = -C::i() / ham.hbar;
            let coef = |f: &SpinorField, mult: C| -> Vec<Vec<C>> {
                (0..k)
                    .map(|s| {
                        let v: Vec<C> = f.component(s).iter().map(|z| z * mult).collect();
                        prefilter(&spectral, &v)
                    })
                    .collect()
            };
            slices.push(Slice { psi: coef(psi, C::new(1.0, 0.0)), dpsi: coef(&hpsi, factor) });
        }
        let first = &run.slices[0];
        let scale = (0..grid.len()).map(|p| first.at(p).iter().map(|z| z.norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
        Ok(Self { grid, space, physics, components: k, dt: run.dt, slices, scale })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.slices.len() - 1) as f64
    }

    /// Interpolated spinor and (when `gradient`) its spatial gradient.
    pub fn spinor(&self, t: f64, q: &[f64], gradient: bool) -> (Vec<C>, Vec<Vec<C>>) {
        let last = self.slices.len() - 1;
        let u = (t / self.dt).clamp(0.0, last as f64);
        let n = (u.floor() as usize).min(last.saturating_sub(1));
        let th = if last == 0 { 0.0 } else { u - n as f64 };
        let h00 = (2.0 * th - 3.0) * th * th + 1.0;
        let h10 = ((th - 2.0) * th + 1.0) * th * self.dt;
        let h01 = (3.0 - 2.0 * th) * th * th;
        let h11 = (th - 1.0) * th * th * self.dt;
        let (a, b) = (&self.slices[n], &self.slices[(n + 1).min(last)]);
        let st = Stencil::new(&self.grid, q);
        let d = self.grid.dim();
        let mut psi = vec![C::new(0.0, 0.0); self.components];
        let mut grad = vec![vec![C::new(0.0, 0.0); self.components]; if gradient { d } else { 0 }];
        for s in 0..self.components {
            for (arr, w) in [(&a.psi[s], h00), (&a.dpsi[s], h10), (&b.psi[s], h01), (&b.dpsi[s], h11)] {
                if w == 0.0 {
                    continue;
                }
                let (v, g) = st.eval(arr, gradient);
                psi[s] += v * w;
                for (i, gi) in g.iter().enumerate() {
                    grad[i][s] += gi * w;
                }
            }
        }
        (psi, grad)
    }
}

impl CurrentProvider for GridProvider {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
        match &self.physics {
            Physics::Dirac { c } => {
                let (psi, _) = self.spinor(t, q, false);
                dirac_sample(&psi, &[sigma_x()], *c)
            }
            Physics::Schrodinger { coupling, shifts } => {
                let (psi, grad) = self.spinor(t, q, true);
                let a: Option<Vec<f64>> = shifts.as_ref().map(|sh| {
                    let st = Stencil::new(&self.grid, q);
                    sh.iter().map(|c| st.eval(c, false).0.re).collect()
                });
                schrodinger_sample(&psi, &grad, a.as_deref(), coupling)
            }
        }
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(0.0, self.horizon())
    }

    fn density_scale(&self) -> f64 {
        self.scale
    }

    fn support(&self) -> &GridSpec {
        &self.grid
    }

    fn config_space(&self) -> &ConfigSpace {
        &self.space
    }

    fn grid_half_width(&self) -> Option<f64> {
        Some(self.grid.half_width())
    }
}

/// Where a provider's current comes from.
#[derive(Clone)]
pub enum ProviderSource {
    /// Exact current of a closed-form scenario; axioms are checked over
    /// `[0, horizon]`.
    Scenario { scenario: Arc<dyn Scenario>, horizon: f64 },
    /// Interpolated current of a propagated wavefunction.
    Pde { run: Arc<PdeRun>, space: ConfigSpace },
}

/// Builds a provider and runs the axiom suite on it.
pub fn build_provider(source: ProviderSource) -> Result<Arc<dyn CurrentProvider>> {
    match source {
        ProviderSource::Scenario { scenario, horizon } => {
            let w = scenario.window();
            if !(w.contains(0.0) && w.contains(horizon)) {
                return Err(Error::ProviderWindow { requested: horizon, min: w.start, max: w.end });
            }
            let p = ScenarioProvider::new(scenario);
            validate_axioms(&p, &AxiomCheck::over((0.0, horizon)))?;
            Ok(Arc::new(p))
        }
        ProviderSource::Pde { run, space } => {
            let p = GridProvider::from_run(&run, space)?;
            let mut check = AxiomCheck::over((0.0, p.horizon()));
            check.continuity_tol = Some(2e-2);
            validate_axioms(&p, &check)?;
            Ok(Arc::new(p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{scenario_by_name, ScenarioParams};

    #[test]
    fn grid_provider_reproduces_closed_form_current() {
        let s = scenario_by_name("free_gaussian", &ScenarioParams::new()).unwrap();
        let grid = GridSpec::cube(1, 20.0, 512).unwrap();
        let run = PdeRun::from_scenario(s.as_ref(), &grid, 0.01, 1.0).unwrap();
        let p = GridProvider::from_run(&run, ConfigSpace::euclidean(1)).unwrap();
        for &t in &[0.0, 0.333, 0.505, 1.0] {
            for &x in &[-2.1, -0.37, 0.0, 1.23] {
                let a = p.sample(t, &[x]);
                let b = s.current(t, &[x]);
                assert!((a.j0 - b.j0).abs() < 1e-6, "j0 at t={t} x={x}: {} vs {}", a.j0, b.j0);
                assert!((a.flux[0] - b.flux[0]).abs() < 1e-5, "J at t={t} x={x}: {} vs {}", a.flux[0], b.flux[0]);
            }
        }
    }

    #[test]
    fn pde_provider_keeps_norm() {
        let s = scenario_by_name("free_gaussian", &ScenarioParams::new()).unwrap();
        let grid = GridSpec::cube(1, 20.0, 512).unwrap();
        let run = PdeRun::from_scenario(s.as_ref(), &grid, 0.01, 1.0).unwrap();
        let n = run.norms();
        let drift = n.iter().map(|x| (x - n[0]).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-8, "drift {drift:e}");
        build_provider(ProviderSource::Pde { run: Arc::new(run), space: ConfigSpace::euclidean(1) }).unwrap();
    }

    #[test]
    fn scenario_provider_passes_axioms() {
        for &name in crate::scenario::SCENARIO_NAMES {
            let s = scenario_by_name(name, &ScenarioParams::new()).unwrap();
            let h = s.horizon();
            build_provider(ProviderSource::Scenario { scenario: s, horizon: h })
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
