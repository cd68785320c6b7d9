//! The current vector field `j = (j⁰, J)` on configuration-space-time,
//! velocity evaluation `dQ/dt = J / j⁰`, and constructors for the
//! Schrödinger and Dirac currents.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Axiom, Error, Result};
use crate::geometry::ConfigSpace;
use crate::grid::{pairwise_sum, GridSpec, SpinorField};

/// One evaluation of the current: density `j⁰` and spatial part `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentSample {
    pub j0: f64,
    pub flux: Vec<f64>,
}

impl CurrentSample {
    pub fn new(j0: f64, flux: Vec<f64>) -> Self {
        Self { j0, flux }
    }

    pub fn zero(dim: usize) -> Self {
        Self { j0: 0.0, flux: vec![0.0; dim] }
    }

    pub fn flux_norm(&self) -> f64 {
        self.flux.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `j = 0` entirely.
    pub fn is_node(&self) -> bool {
        self.j0 == 0.0 && self.flux.iter().all(|&x| x == 0.0)
    }
}

/// Closed time interval on which a provider may be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn unbounded() -> Self {
        Self { start: f64::NEG_INFINITY, end: f64::INFINITY }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn negated(&self) -> Self {
        Self { start: -self.end, end: -self.start }
    }
}

/// Evaluator of a current vector field.
///
/// Implementations are immutable after construction; `sample` must be a pure
/// function of `(t, q)`.
pub trait CurrentProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample;

    fn window(&self) -> TimeWindow;

    /// `sup_q j⁰(0, q)`, the reference for the relative node threshold.
    fn density_scale(&self) -> f64;

    /// Grid covering the region that carries the mass; used for quadrature
    /// and for inverse-CDF sampling.
    fn support(&self) -> &GridSpec;

    /// The domain `Ω` on which the current is defined.
    fn config_space(&self) -> &ConfigSpace;

    /// Half-width of the backing grid for grid-backed providers.
    fn grid_half_width(&self) -> Option<f64> {
        None
    }
}

macro_rules! forward_provider {
    ($ty:ty) => {
        impl<P: CurrentProvider + ?Sized> CurrentProvider for $ty {
            fn dim(&self) -> usize {
                (**self).dim()
            }
            fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
                (**self).sample(t, q)
            }
            fn window(&self) -> TimeWindow {
                (**self).window()
            }
            fn density_scale(&self) -> f64 {
                (**self).density_scale()
            }
            fn support(&self) -> &GridSpec {
                (**self).support()
            }
            fn config_space(&self) -> &ConfigSpace {
                (**self).config_space()
            }
            fn grid_half_width(&self) -> Option<f64> {
                (**self).grid_half_width()
            }
        }
    };
}

forward_provider!(&P);
forward_provider!(Box<P>);
forward_provider!(Arc<P>);

/// Operational node rule: `j⁰ < epsilon_node * density_scale` counts as a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePolicy {
    pub epsilon_node: f64,
}

impl Default for NodePolicy {
    fn default() -> Self {
        Self { epsilon_node: 1e-9 }
    }
}

impl NodePolicy {
    pub fn new(epsilon_node: f64) -> Result<Self> {
        if !(epsilon_node > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon_node must be positive, got {epsilon_node}")));
        }
        Ok(Self { epsilon_node })
    }

    pub fn threshold<P: CurrentProvider + ?Sized>(&self, provider: &P) -> f64 {
        self.epsilon_node * provider.density_scale()
    }
}

/// `J / j⁰` from an already evaluated sample.
pub fn velocity_of(sample: &CurrentSample, threshold: f64, t: f64) -> Result<Vec<f64>> {
    if !(sample.j0 >= threshold) || sample.j0 <= 0.0 {
        return Err(Error::NodeEncountered { t, j0: sample.j0, threshold });
    }
    Ok(sample.flux.iter().map(|x| x / sample.j0).collect())
}

/// Guidance velocity `dQ/dt = J(t,q) / j⁰(t,q)`.
pub fn velocity<P: CurrentProvider + ?Sized>(provider: &P, policy: &NodePolicy, t: f64, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != provider.dim() {
        return Err(Error::DimensionMismatch { expected: provider.dim(), found: q.len() });
    }
    let w = provider.window();
    if !w.contains(t) {
        return Err(Error::OutOfDomain(format!("t={t} outside [{}, {}]", w.start, w.end)));
    }
    if let Some(i) = provider.config_space().singular().iter().position(|s| s.distance(q) == 0.0) {
        return Err(Error::OutOfDomain(format!("q lies on singular subspace {i}")));
    }
    velocity_of(&provider.sample(t, q), policy.threshold(provider), t)
}

/// Time-reversed current `j̄(t, q) = (j⁰(-t, q), -J(-t, q))`.
#[derive(Debug, Clone)]
pub struct TimeReversed<P> {
    inner: P,
}

impl<P: CurrentProvider> TimeReversed<P> {
    pub fn new(inner: P) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

pub fn time_reverse<P: CurrentProvider>(provider: P) -> TimeReversed<P> {
    TimeReversed::new(provider)
}

impl<P: CurrentProvider> CurrentProvider for TimeReversed<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
        let mut s = self.inner.sample(-t, q);
        s.flux.iter_mut().for_each(|x| *x = -*x);
        s
    }

    fn window(&self) -> TimeWindow {
        self.inner.window().negated()
    }

    fn density_scale(&self) -> f64 {
        self.inner.density_scale()
    }

    fn support(&self) -> &GridSpec {
        self.inner.support()
    }

    fn config_space(&self) -> &ConfigSpace {
        self.inner.config_space()
    }

    fn grid_half_width(&self) -> Option<f64> {
        self.inner.grid_half_width()
    }
}

/// Multiplies `J` by a constant; used as a negative control (it breaks
/// continuity unless the factor is 1).
#[derive(Debug, Clone)]
pub struct ScaledFlux<P> {
    inner: P,
    factor: f64,
}

impl<P: CurrentProvider> ScaledFlux<P> {
    pub fn new(inner: P, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl<P: CurrentProvider> CurrentProvider for ScaledFlux<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
        let mut s = self.inner.sample(t, q);
        s.flux.iter_mut().for_each(|x| *x *= self.factor);
        s
    }
    fn window(&self) -> TimeWindow {
        self.inner.window()
    }
    fn density_scale(&self) -> f64 {
        self.inner.density_scale()
    }
    fn support(&self) -> &GridSpec {
        self.inner.support()
    }
    fn config_space(&self) -> &ConfigSpace {
        self.inner.config_space()
    }
    fn grid_half_width(&self) -> Option<f64> {
        self.inner.grid_half_width()
    }
}

/// Time-independent density with `J = 0`, normalised on its support grid.
pub struct StaticProvider {
    support: GridSpec,
    space: ConfigSpace,
    density: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    norm: f64,
    scale: f64,
}

impl std::fmt::Debug for StaticProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StaticProvider").field("support", &self.support).finish()
    }
}

impl StaticProvider {
    pub fn new<F>(support: GridSpec, density: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let vals: Vec<f64> = support.points_iter().map(|q| density(&q)).collect();
        let mass = pairwise_sum(&vals) * support.cell_volume();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::DegenerateDensity);
        }
        let scale = vals.iter().copied().fold(0.0, f64::max) / mass;
        let space = ConfigSpace::euclidean(support.dim());
        Ok(Self { support, space, density: Box::new(density), norm: 1.0 / mass, scale })
    }
}

impl CurrentProvider for StaticProvider {
    fn dim(&self) -> usize {
        self.support.dim()
    }
    fn sample(&self, _t: f64, q: &[f64]) -> CurrentSample {
        CurrentSample::new((self.density)(q) * self.norm, vec![0.0; q.len()])
    }
    fn window(&self) -> TimeWindow {
        TimeWindow::unbounded()
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

/// Current transported by the linear field `v = rate * q`.
///
/// The flow is `φ_t(q) = q e^{rate t}` and the density is the exact
/// pushforward of a centred isotropic Gaussian of width `sigma`.
#[derive(Debug, Clone)]
pub struct LinearFlowProvider {
    rate: f64,
    sigma: f64,
    support: GridSpec,
    space: ConfigSpace,
}

impl LinearFlowProvider {
    pub fn new(dim: usize, rate: f64, sigma: f64, support_extent: f64, points: usize) -> Result<Self> {
        let support = GridSpec::cube(dim, support_extent, points)?;
        Ok(Self { rate, sigma, support, space: ConfigSpace::euclidean(dim) })
    }

    pub fn flow(&self, t: f64, q: &[f64]) -> Vec<f64> {
        let s = (self.rate * t).exp();
        q.iter().map(|x| x * s).collect()
    }

    fn base_density(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (2.0 * std::f64::consts::PI * self.sigma * self.sigma).powf(-d / 2.0)
            * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

impl CurrentProvider for LinearFlowProvider {
    fn dim(&self) -> usize {
        self.support.dim()
    }
    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
        let d = q.len() as f64;
        let back: Vec<f64> = q.iter().map(|x| x * (-self.rate * t).exp()).collect();
        let j0 = (-self.rate * t * d).exp() * self.base_density(&back);
        CurrentSample::new(j0, q.iter().map(|x| self.rate * x * j0).collect())
    }
    fn window(&self) -> TimeWindow {
        TimeWindow::unbounded()
    }
    fn density_scale(&self) -> f64 {
        self.base_density(&vec![0.0; self.dim()])
    }
    fn support(&self) -> &GridSpec {
        &self.support
    }
    fn config_space(&self) -> &ConfigSpace {
        &self.space
    }
}

/// Provider built from an arbitrary closure; no validation is performed.
pub struct FnProvider {
    support: GridSpec,
    space: ConfigSpace,
    window: TimeWindow,
    scale: f64,
    f: Box<dyn Fn(f64, &[f64]) -> CurrentSample + Send + Sync>,
}

impl FnProvider {
    pub fn new<F>(support: GridSpec, space: ConfigSpace, window: TimeWindow, scale: f64, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> CurrentSample + Send + Sync + 'static,
    {
        Self { support, space, window, scale, f: Box::new(f) }
    }
}

impl CurrentProvider for FnProvider {
    fn dim(&self) -> usize {
        self.support.dim()
    }
    fn sample(&self, t: f64, q: &[f64]) -> CurrentSample {
        (self.f)(t, q)
    }
    fn window(&self) -> TimeWindow {
        self.window
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

/// Physical constants entering the Schrödinger current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerCoupling {
    pub hbar: f64,
    /// Diagonal of the mass matrix, one entry per coordinate.
    pub masses: Vec<f64>,
    /// `e_i / (c ħ)` per coordinate.
    pub charges_over_c_hbar: Vec<f64>,
}

impl SchrodingerCoupling {
    /// `ħ = 1`, unit masses, no charge.
    pub fn natural(dim: usize) -> Self {
        Self { hbar: 1.0, masses: vec![1.0; dim], charges_over_c_hbar: vec![0.0; dim] }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.masses.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.masses.len() });
        }
        if self.charges_over_c_hbar.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.charges_over_c_hbar.len() });
        }
        if self.masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidInput("masses must be positive".into()));
        }
        Ok(())
    }
}

/// Pointwise Schrödinger current
/// `j⁰ = ψ*ψ`, `J_i = (ħ/m_i) Im ψ*(∂_i − i κ_i A_i)ψ`.
///
/// `grad[i]` holds `∂_i ψ` (all spin components).
pub fn schrodinger_sample(
    psi: &[Complex64],
    grad: &[Vec<Complex64>],
    vector_potential: Option<&[f64]>,
    coupling: &SchrodingerCoupling,
) -> CurrentSample {
    let j0: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let flux = grad
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let im: f64 = psi.iter().zip(g).map(|(p, d)| (p.conj() * d).im).sum();
            let a = vector_potential.map_or(0.0, |a| a[i]);
            coupling.hbar / coupling.masses[i] * (im - coupling.charges_over_c_hbar[i] * a * j0)
        })
        .collect();
    CurrentSample { j0, flux }
}

/// Current sampled on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentField {
    pub grid: GridSpec,
    pub j0: Vec<f64>,
    /// `flux[i][p]` is `J_i` at node `p`.
    pub flux: Vec<Vec<f64>>,
}

impl CurrentField {
    pub fn sample(&self, p: usize) -> CurrentSample {
        CurrentSample::new(self.j0[p], self.flux.iter().map(|f| f[p]).collect())
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.j0) * self.grid.cell_volume()
    }
}

/// Schrödinger current on a grid from `ψ`, its gradient fields and an
/// optional vector potential (`vector_potential[i][p] = A_i` at node `p`).
pub fn schrodinger_current(
    psi: &SpinorField,
    grad: &[SpinorField],
    vector_potential: Option<&[Vec<f64>]>,
    coupling: &SchrodingerCoupling,
) -> Result<CurrentField> {
    let d = psi.grid.dim();
    coupling.validate(d)?;
    if grad.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: grad.len() });
    }
    if let Some(g) = grad.iter().find(|g| !g.same_shape(psi)) {
        return Err(Error::DimensionMismatch { expected: psi.data.len(), found: g.data.len() });
    }
    if let Some(a) = vector_potential {
        if a.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: a.len() });
        }
        if let Some(ai) = a.iter().find(|ai| ai.len() != psi.n_points()) {
            return Err(Error::DimensionMismatch { expected: psi.n_points(), found: ai.len() });
        }
    }
    let n = psi.n_points();
    let mut j0 = vec![0.0; n];
    let mut flux = vec![vec![0.0; n]; d];
    let mut a_here = vec![0.0; d];
    for p in 0..n {
        let v = psi.at(p);
        let g: Vec<Vec<Complex64>> = grad.iter().map(|g| g.at(p)).collect();
        if let Some(a) = vector_potential {
            for i in 0..d {
                a_here[i] = a[i][p];
            }
        }
        let s = schrodinger_sample(&v, &g, vector_potential.map(|_| a_here.as_slice()), coupling);
        j0[p] = s.j0;
        for i in 0..d {
            flux[i][p] = s.flux[i];
        }
    }
    Ok(CurrentField { grid: psi.grid.clone(), j0, flux })
}

/// Checks that every alpha matrix is Hermitian with spectrum in `[-1, 1]`.
pub fn validate_alphas(alphas: &[DMatrix<Complex64>], k: usize) -> Result<()> {
    for (i, a) in alphas.iter().enumerate() {
        if a.nrows() != k || a.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: a.nrows() });
        }
        let herm = (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidInput(format!("alpha {i} is not Hermitian (deviation {herm:e})")));
        }
        let eig = a.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l.abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("alpha {i} has eigenvalues outside [-1, 1]")));
        }
    }
    Ok(())
}

/// Pointwise Dirac current `j = (ψ*ψ, c ψ*α_1ψ, …)`.
pub fn dirac_sample(psi: &[Complex64], alphas: &[DMatrix<Complex64>], c: f64) -> CurrentSample {
    let j0: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let flux = alphas
        .iter()
        .map(|a| {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..psi.len() {
                let mut row = Complex64::new(0.0, 0.0);
                for s in 0..psi.len() {
                    row += a[(r, s)] * psi[s];
                }
                acc += psi[r].conj() * row;
            }
            c * acc.re
        })
        .collect();
    CurrentSample { j0, flux }
}

/// Dirac current on a grid.
pub fn dirac_current(psi: &SpinorField, alphas: &[DMatrix<Complex64>], c: f64) -> Result<CurrentField> {
    validate_alphas(alphas, psi.components)?;
    let n = psi.n_points();
    let m = alphas.len();
    let mut j0 = vec![0.0; n];
    let mut flux = vec![vec![0.0; n]; m];
    for p in 0..n {
        let s = dirac_sample(&psi.at(p), alphas, c);
        j0[p] = s.j0;
        for i in 0..m {
            flux[i][p] = s.flux[i];
        }
    }
    Ok(CurrentField { grid: psi.grid.clone(), j0, flux })
}

/// First Pauli matrix, the alpha matrix of the 1D two-component Dirac equation.
pub fn sigma_x() -> DMatrix<Complex64> {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    DMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

/// Centred-difference estimate of `∂_t j⁰ + ∇·J` at every node of `region`.
pub fn divergence_residual<P: CurrentProvider + ?Sized>(
    provider: &P,
    t: f64,
    region: &GridSpec,
    h: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let w = provider.window();
    if !(w.contains(t - dt) && w.contains(t + dt)) {
        return Err(Error::OutOfDomain(format!(
            "stencil [{}, {}] leaves window [{}, {}]",
            t - dt,
            t + dt,
            w.start,
            w.end
        )));
    }
    if region.dim() != provider.dim() {
        return Err(Error::DimensionMismatch { expected: provider.dim(), found: region.dim() });
    }
    Ok(region.points_iter().map(|q| residual_at(provider, t, &q, h, dt)).collect())
}

pub(crate) fn residual_at<P: CurrentProvider + ?Sized>(provider: &P, t: f64, q: &[f64], h: f64, dt: f64) -> f64 {
    let (r, _) = residual_parts(provider, t, q, h, dt);
    r
}

/// Returns `(∂_t j⁰ + ∇·J, |∂_t j⁰| + Σ|∂_i J_i|)`.
fn residual_parts<P: CurrentProvider + ?Sized>(provider: &P, t: f64, q: &[f64], h: f64, dt: f64) -> (f64, f64) {
    let dtj0 = (provider.sample(t + dt, q).j0 - provider.sample(t - dt, q).j0) / (2.0 * dt);
    let mut div = 0.0;
    let mut mag = dtj0.abs();
    let mut x = q.to_vec();
    for i in 0..q.len() {
        x[i] = q[i] + h;
        let jp = provider.sample(t, &x).flux[i];
        x[i] = q[i] - h;
        let jm = provider.sample(t, &x).flux[i];
        x[i] = q[i];
        let d = (jp - jm) / (2.0 * h);
        div += d;
        mag += d.abs();
    }
    (dtj0 + div, mag)
}

/// Settings for [`validate_axioms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    /// Random check times are drawn from this interval.
    pub span: (f64, f64),
    pub times: usize,
    pub normalization_tol: f64,
    /// Allowed `max|∂_t j⁰ + ∇·J|` relative to `max(|∂_t j⁰| + Σ|∂_i J_i|)`;
    /// `None` skips the continuity check.
    pub continuity_tol: Option<f64>,
    /// Upper bound on the number of nodes per time used by the continuity check.
    pub continuity_points: usize,
    pub seed: u64,
}

impl AxiomCheck {
    pub fn over(span: (f64, f64)) -> Self {
        Self {
            span,
            times: 5,
            normalization_tol: 1e-6,
            continuity_tol: Some(1e-3),
            continuity_points: 256,
            seed: 0x5eed,
        }
    }
}

/// What [`validate_axioms`] measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub times: Vec<f64>,
    pub max_mass_error: f64,
    pub max_relative_residual: f64,
}

/// Runs the axiom suite: finiteness, positivity, normalisation and
/// continuity, in that order, on the provider's support grid.
pub fn validate_axioms<P: CurrentProvider + ?Sized>(provider: &P, check: &AxiomCheck) -> Result<AxiomReport> {
    let grid = provider.support();
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let (a, b) = check.span;
    let mut times = vec![a];
    times.extend((1..check.times.max(1)).map(|_| if b > a { rng.random_range(a..=b) } else { a }));
    let scale = provider.density_scale();
    let dv = grid.cell_volume();
    let mut max_mass_error: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    for &t in &times {
        let samples: Vec<CurrentSample> = grid.points_iter().map(|q| provider.sample(t, &q)).collect();
        if let Some((p, _)) =
            samples.iter().enumerate().find(|(_, s)| !s.j0.is_finite() || s.flux.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::AxiomViolation {
                axiom: Axiom::Smooth,
                detail: format!("non-finite sample at t={t}, q={:?}", grid.point(p)),
            });
        }
        for (p, s) in samples.iter().enumerate() {
            if s.j0 < -1e-14 * scale.max(f64::MIN_POSITIVE) || (s.j0 <= 0.0 && s.flux_norm() > 0.0) {
                return Err(Error::AxiomViolation {
                    axiom: Axiom::Positivity,
                    detail: format!("j0={:e}, |J|={:e} at t={t}, q={:?}", s.j0, s.flux_norm(), grid.point(p)),
                });
            }
        }
        let vals: Vec<f64> = samples.iter().map(|s| s.j0).collect();
        let mass = pairwise_sum(&vals) * dv;
        max_mass_error = max_mass_error.max((mass - 1.0).abs());
        if (mass - 1.0).abs() > check.normalization_tol {
            return Err(Error::AxiomViolation { axiom: Axiom::Normalization, detail: format!("mass {mass} at t={t}") });
        }
        if let Some(tol) = check.continuity_tol {
            let h = (0..grid.dim()).map(|i| grid.spacing(i)).fold(f64::INFINITY, f64::min) * 0.02;
            let dt = 1e-4;
            let w = provider.window();
            let tc = t.clamp(w.start + dt, w.end - dt);
            let candidates: Vec<usize> = (0..grid.len()).filter(|&p| vals[p] >= 1e-6 * scale).collect();
            let stride = (candidates.len() / check.continuity_points.max(1)).max(1);
            let mut worst: f64 = 0.0;
            let mut typical: f64 = 0.0;
            for &p in candidates.iter().step_by(stride) {
                let (r, m) = residual_parts(provider, tc, &grid.point(p), h, dt);
                worst = worst.max(r.abs());
                typical = typical.max(m);
            }
            // Floor for fields that are momentarily stationary, where both terms
            // are at roundoff level.
            let rel = worst / typical.max(1e-6 * scale).max(f64::MIN_POSITIVE);
            max_rel = max_rel.max(rel);
            if rel > tol {
                return Err(Error::AxiomViolation {
                    axiom: Axiom::Continuity,
                    detail: format!("relative residual {rel:e} at t={tc}"),
                });
            }
        }
    }
    Ok(AxiomReport { times, max_mass_error, max_relative_residual: max_rel })
}
