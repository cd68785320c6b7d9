//! Closed-form wavefunctions used as exact oracles, and a registry that
//! addresses them by name.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::current::{dirac_sample, schrodinger_sample, sigma_x, CurrentSample, SchrodingerCoupling, TimeWindow};
use crate::error::{Error, Result};
use crate::geometry::{ConfigSpace, SingularSubspace};
use crate::grid::{GridSpec, SpinorField};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// The evolution equation a scenario solves.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// `iħ ∂_t ψ = Σ_i -(ħ²/2m_i) ∂_i² ψ + V ψ`.
    Schrodinger(SchrodingerCoupling),
    /// `iħ ∂_t ψ = -iħc σ_x ∂_q ψ + m c² σ_z ψ + V ψ` in one dimension.
    Dirac { hbar: f64, c: f64, mass: f64 },
}

/// A wavefunction known in closed form.
pub trait Scenario: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn components(&self) -> usize {
        1
    }

    fn dynamics(&self) -> Dynamics;

    /// Scalar potential `V(q)`; zero unless overridden.
    fn potential(&self, _q: &[f64]) -> f64 {
        0.0
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C>;

    /// `grad[i][s] = ∂_i ψ_s`.
    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>>;

    /// Exact current, from the analytic gradient unless overridden.
    fn current(&self, t: f64, q: &[f64]) -> CurrentSample {
        let psi = self.psi(t, q);
        match self.dynamics() {
            Dynamics::Schrodinger(coupling) => schrodinger_sample(&psi, &self.grad_psi(t, q), None, &coupling),
            Dynamics::Dirac { c, .. } => dirac_sample(&psi, &[sigma_x()], c),
        }
    }

    /// Grid that covers the mass over the whole window and resolves `ψ`.
    fn grid(&self) -> GridSpec;

    /// Default time horizon for runs.
    fn horizon(&self) -> f64;

    /// Times at which the closed form (and the grid) are trustworthy.
    fn window(&self) -> TimeWindow;

    fn config_space(&self) -> ConfigSpace {
        ConfigSpace::euclidean(self.dim())
    }

    /// Exact trajectory through `q0` at time `t`, where known.
    fn trajectory(&self, _q0: &[f64], _t: f64) -> Option<Vec<f64>> {
        None
    }

    /// `ψ(0, ·)` sampled on `grid`.
    fn initial_field(&self, grid: &GridSpec) -> Result<SpinorField> {
        SpinorField::from_fn(grid.clone(), self.components(), |q| self.psi(0.0, q))
    }
}

/// Evaluates `ψ(t, q)` after checking the window and the dimension.
pub fn scenario_eval(s: &dyn Scenario, t: f64, q: &[f64]) -> Result<Vec<C>> {
    if q.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: q.len() });
    }
    let w = s.window();
    if !w.contains(t) {
        return Err(Error::OutOfDomain(format!("t={t} outside scenario window [{}, {}]", w.start, w.end)));
    }
    Ok(s.psi(t, q))
}

/// Named numeric parameters for scenario construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioParams(pub BTreeMap<String, f64>);

impl ScenarioParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str, default: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidInput(format!("scenario parameter {key} must be positive, got {v}")))
        }
    }

    fn check_known(&self, name: &str, known: &[&str]) -> Result<()> {
        match self.0.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidInput(format!(
                "unknown parameter {k} for scenario {name}; expected one of {known:?}"
            ))),
            None => Ok(()),
        }
    }
}

/// Names accepted by [`scenario_by_name`].
pub const SCENARIO_NAMES: &[&str] = &[
    "free_gaussian",
    "free_gaussian_2d",
    "oscillator_superposition",
    "hydrogenic",
    "plane_wave",
    "dirac_packet",
    "dirac_massless",
    "coincidence",
    "harmonic_ground",
    "coherent_state",
];

pub fn scenario_by_name(name: &str, params: &ScenarioParams) -> Result<Arc<dyn Scenario>> {
    Ok(match name {
        "free_gaussian" => {
            params.check_known(name, &["hbar", "mass", "sigma", "x0", "p0"])?;
            Arc::new(FreeGaussian::new(
                params.positive("hbar", 1.0)?,
                params.positive("mass", 1.0)?,
                params.positive("sigma", 1.0)?,
                vec![params.get("x0", 0.0)],
                vec![params.get("p0", 0.0)],
            )?)
        }
        "free_gaussian_2d" => {
            params.check_known(name, &["hbar", "mass", "sigma", "x0", "y0", "px", "py"])?;
            Arc::new(FreeGaussian::new(
                params.positive("hbar", 1.0)?,
                params.positive("mass", 1.0)?,
                params.positive("sigma", 1.0)?,
                vec![params.get("x0", 0.0), params.get("y0", 0.0)],
                vec![params.get("px", 0.0), params.get("py", 0.0)],
            )?)
        }
        "oscillator_superposition" => {
            params.check_known(name, &[])?;
            Arc::new(OscillatorSuperposition)
        }
        "hydrogenic" => {
            params.check_known(name, &["lambda"])?;
            Arc::new(Hydrogenic::new(params.positive("lambda", 1.0)?))
        }
        "plane_wave" => {
            params.check_known(name, &["k", "box", "hbar", "mass"])?;
            Arc::new(PlaneWave::new(
                params.get("k", 1.0),
                params.positive("box", PI)?,
                params.positive("hbar", 1.0)?,
                params.positive("mass", 1.0)?,
            )?)
        }
        "dirac_packet" | "dirac_massless" => {
            params.check_known(name, &["c", "mass", "hbar", "sigma", "x0", "k0", "upper", "lower", "box", "modes"])?;
            let massless = name == "dirac_massless";
            let (up, lo) = if massless { (FRAC_1_SQRT_2, FRAC_1_SQRT_2) } else { (1.0, 0.0) };
            Arc::new(DiracPacket::new(DiracPacketParams {
                name: name.to_string(),
                hbar: params.positive("hbar", 1.0)?,
                c: params.positive("c", 1.0)?,
                mass: params.get("mass", if massless { 0.0 } else { 1.0 }),
                sigma: params.positive("sigma", 1.0)?,
                x0: params.get("x0", 0.0),
                k0: params.get("k0", 0.0),
                spinor: [C::new(params.get("upper", up), 0.0), C::new(params.get("lower", lo), 0.0)],
                extent: params.positive("box", 20.0)?,
                modes: params.positive("modes", 512.0)? as usize,
            })?)
        }
        "coincidence" => {
            params.check_known(name, &["sigma", "separation", "pa", "pb"])?;
            Arc::new(Coincidence::new(
                params.positive("sigma", 1.0)?,
                params.positive("separation", 3.0)?,
                params.get("pa", 0.0),
                params.get("pb", 0.0),
            )?)
        }
        "harmonic_ground" => {
            params.check_known(name, &[])?;
            Arc::new(HarmonicGround)
        }
        "coherent_state" => {
            params.check_known(name, &["x0"])?;
            Arc::new(CoherentState { x0: params.get("x0", 1.0) })
        }
        other => {
            return Err(Error::InvalidInput(format!("unknown scenario {other}; known: {}", SCENARIO_NAMES.join(", "))))
        }
    })
}

/// One free Gaussian factor `ψ(0, q) = (2πσ²)^{-1/4} exp(-(q-x₀)²/4σ² + i p₀ q/ħ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub hbar: f64,
    pub mass: f64,
    pub sigma: f64,
    pub x0: f64,
    pub p0: f64,
}

impl Gaussian1 {
    fn a(&self, t: f64) -> C {
        C::new(self.sigma * self.sigma, self.hbar * t / (2.0 * self.mass))
    }

    fn group_velocity(&self) -> f64 {
        self.p0 / self.mass
    }

    pub fn value(&self, t: f64, q: f64) -> C {
        let a = self.a(t);
        let v = self.group_velocity();
        let u = q - v * t - self.x0;
        let pref = (2.0 * PI).powf(-0.25) * self.sigma.sqrt() / a.sqrt();
        pref * (-u * u / (4.0 * a) + I * (self.p0 * (q - 0.5 * v * t) / self.hbar)).exp()
    }

    /// `(ψ, ∂_q ψ)`.
    pub fn value_and_derivative(&self, t: f64, q: f64) -> (C, C) {
        let psi = self.value(t, q);
        let u = q - self.group_velocity() * t - self.x0;
        (psi, psi * (-u / (2.0 * self.a(t)) + I * (self.p0 / self.hbar)))
    }

    /// Width `s(t) = |a(t)| / σ` of `|ψ|²`.
    pub fn width(&self, t: f64) -> f64 {
        self.a(t).norm() / self.sigma
    }

    pub fn trajectory(&self, q0: f64, t: f64) -> f64 {
        self.x0 + self.group_velocity() * t + (q0 - self.x0) * self.width(t) / self.sigma
    }

    pub fn velocity(&self, t: f64, q: f64) -> f64 {
        let tau = self.hbar * t / (2.0 * self.mass * self.sigma * self.sigma);
        let rate = self.hbar * self.hbar * t / (4.0 * self.mass * self.mass * self.sigma.powi(4)) / (1.0 + tau * tau);
        self.group_velocity() + (q - self.group_velocity() * t - self.x0) * rate
    }

    pub fn density(&self, t: f64, q: f64) -> f64 {
        let s = self.width(t);
        let u = q - self.group_velocity() * t - self.x0;
        (-u * u / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
    }

    pub fn cdf(&self, t: f64, q: f64) -> f64 {
        let s = self.width(t);
        let u = q - self.group_velocity() * t - self.x0;
        0.5 * libm::erfc(-u / (s * SQRT_2))
    }
}

/// Product of free Gaussians, one per axis, with common `ħ`, mass and width.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeGaussian {
    factors: Vec<Gaussian1>,
    name: String,
}

impl FreeGaussian {
    pub fn new(hbar: f64, mass: f64, sigma: f64, x0: Vec<f64>, p0: Vec<f64>) -> Result<Self> {
        if x0.len() != p0.len() || x0.is_empty() {
            return Err(Error::DimensionMismatch { expected: x0.len(), found: p0.len() });
        }
        let factors = x0.iter().zip(&p0).map(|(&x0, &p0)| Gaussian1 { hbar, mass, sigma, x0, p0 }).collect::<Vec<_>>();
        let name =
            if factors.len() == 1 { "free_gaussian".to_string() } else { format!("free_gaussian_{}d", factors.len()) };
        Ok(Self { factors, name })
    }

    pub fn factor(&self, axis: usize) -> &Gaussian1 {
        &self.factors[axis]
    }

    pub fn density(&self, t: f64, q: &[f64]) -> f64 {
        self.factors.iter().zip(q).map(|(g, &x)| g.density(t, x)).product()
    }

    pub fn velocity(&self, t: f64, q: &[f64]) -> Vec<f64> {
        self.factors.iter().zip(q).map(|(g, &x)| g.velocity(t, x)).collect()
    }
}

const FREE_WINDOW: f64 = 5.0;

impl Scenario for FreeGaussian {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.factors.len()
    }

    fn dynamics(&self) -> Dynamics {
        let g = self.factors[0];
        Dynamics::Schrodinger(SchrodingerCoupling {
            hbar: g.hbar,
            masses: vec![g.mass; self.dim()],
            charges_over_c_hbar: vec![0.0; self.dim()],
        })
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        vec![self.factors.iter().zip(q).map(|(g, &x)| g.value(t, x)).product()]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        let parts: Vec<(C, C)> = self.factors.iter().zip(q).map(|(g, &x)| g.value_and_derivative(t, x)).collect();
        (0..parts.len())
            .map(|i| {
                let prod: C = parts.iter().enumerate().map(|(j, p)| if i == j { p.1 } else { p.0 }).product();
                vec![prod]
            })
            .collect()
    }

    fn current(&self, t: f64, q: &[f64]) -> CurrentSample {
        let j0 = self.density(t, q);
        CurrentSample::new(j0, self.velocity(t, q).into_iter().map(|v| v * j0).collect())
    }

    fn grid(&self) -> GridSpec {
        let d = self.dim();
        let reach = self
            .factors
            .iter()
            .map(|g| 10.0 * g.width(FREE_WINDOW) + g.x0.abs() + g.group_velocity().abs() * FREE_WINDOW)
            .fold(0.0, f64::max);
        let kmax = self.factors.iter().map(|g| (g.p0 / g.hbar).abs() + 8.0 / g.sigma).fold(0.0, f64::max);
        let mut points: usize = if d == 1 { 1024 } else { 128 };
        while PI * points as f64 / (2.0 * reach) < kmax {
            points *= 2;
        }
        GridSpec::cube(d, reach.max(10.0), points).expect("positive extent")
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-FREE_WINDOW, FREE_WINDOW)
    }

    fn trajectory(&self, q0: &[f64], t: f64) -> Option<Vec<f64>> {
        Some(self.factors.iter().zip(q0).map(|(g, &x)| g.trajectory(x, t)).collect())
    }
}

/// `(φ₀ e^{-it/2} + φ₂ e^{-5it/2}) / √2` in the potential `q²/2` (`ħ = m = ω = 1`).
///
/// The density vanishes at `q = ±√((1+√2)/2)` when `t = π/2 + nπ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorSuperposition;

impl OscillatorSuperposition {
    fn p(q: f64) -> f64 {
        (2.0 * q * q - 1.0) / SQRT_2
    }

    /// Nodes of `ψ(t, ·)`: `1 + p(q) e^{-2it} = 0` forces `e^{-2it} = ±1` and
    /// then the quadratic `2q² - 1 ± √2 = 0`.
    pub fn node_positions(t: f64) -> Vec<f64> {
        let c = (2.0 * t).cos();
        if (2.0 * t).sin().abs() > 1e-12 || c > 0.0 {
            return Vec::new();
        }
        let r = ((1.0 + SQRT_2) / 2.0).sqrt();
        vec![-r, r]
    }

    /// First node collision: time `π/2` at `q = √((1+√2)/2)`.
    pub fn collision_point() -> (f64, f64) {
        (PI / 2.0, ((1.0 + SQRT_2) / 2.0).sqrt())
    }

    /// `∫_{-∞}^q |ψ(t, x)|² dx` in closed form.
    pub fn cdf(t: f64, q: f64) -> f64 {
        let c = (2.0 * t).cos();
        let e = (-q * q).exp();
        let g0 = 0.5 * PI.sqrt() * libm::erfc(-q);
        let g2 = 0.5 * (-q * e + g0);
        let g4 = 0.5 * (-q * q * q * e + 3.0 * g2);
        0.5 / PI.sqrt() * (2.0 * g4 + (2.0 * SQRT_2 * c - 2.0) * g2 + (1.5 - SQRT_2 * c) * g0)
    }

    pub fn density(t: f64, q: f64) -> f64 {
        let p = Self::p(q);
        (-q * q).exp() * (1.0 + p * p + 2.0 * p * (2.0 * t).cos()) / (2.0 * PI.sqrt())
    }

    /// Initial point whose trajectory runs into the node at `t = π/2`.
    ///
    /// The flow of a one-dimensional current preserves quantiles, so the start
    /// solves `F_0(q₀) = F_{π/2}(q_node)`.
    pub fn collision_start() -> f64 {
        let (tn, qn) = Self::collision_point();
        let target = Self::cdf(tn, qn);
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::cdf(0.0, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * mid.abs() {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

impl Scenario for OscillatorSuperposition {
    fn name(&self) -> &str {
        "oscillator_superposition"
    }

    fn dim(&self) -> usize {
        1
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Schrodinger(SchrodingerCoupling::natural(1))
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q[0] * q[0]
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        let x = q[0];
        let n = PI.powf(-0.25) * (-0.5 * x * x).exp() * FRAC_1_SQRT_2;
        vec![n * ((-0.5 * I * t).exp() + Self::p(x) * (-2.5 * I * t).exp())]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        let x = q[0];
        let n = PI.powf(-0.25) * (-0.5 * x * x).exp() * FRAC_1_SQRT_2;
        let a = (-0.5 * I * t).exp();
        let b = (-2.5 * I * t).exp();
        let p = Self::p(x);
        let dp = 2.0 * SQRT_2 * x;
        vec![vec![n * (-x * (a + p * b) + dp * b)]]
    }

    fn current(&self, t: f64, q: &[f64]) -> CurrentSample {
        let x = q[0];
        let flux = -SQRT_2 * x * (-x * x).exp() * (2.0 * t).sin() / PI.sqrt();
        CurrentSample::new(Self::density(t, x), vec![flux])
    }

    fn grid(&self) -> GridSpec {
        GridSpec::cube(1, 12.0, 512).expect("valid grid")
    }

    fn horizon(&self) -> f64 {
        2.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-20.0, 20.0)
    }
}

/// Cusp state `√λ e^{-λ|q|}` with singular set `{0}`. The current is static
/// with `J = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hydrogenic {
    pub lambda: f64,
}

impl Hydrogenic {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }
}

impl Scenario for Hydrogenic {
    fn name(&self) -> &str {
        "hydrogenic"
    }

    fn dim(&self) -> usize {
        1
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Schrodinger(SchrodingerCoupling::natural(1))
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        let l = self.lambda;
        vec![l.sqrt() * (-l * q[0].abs()).exp() * (0.5 * I * l * l * t).exp()]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        let psi = self.psi(t, q)[0];
        vec![vec![-self.lambda * q[0].signum() * psi]]
    }

    fn current(&self, _t: f64, q: &[f64]) -> CurrentSample {
        let l = self.lambda;
        CurrentSample::new(l * (-2.0 * l * q[0].abs()).exp(), vec![0.0])
    }

    fn grid(&self) -> GridSpec {
        GridSpec::cube(1, 20.0 / self.lambda, 32768).expect("valid grid")
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-100.0, 100.0)
    }

    fn config_space(&self) -> ConfigSpace {
        ConfigSpace::new(1, vec![SingularSubspace::point(vec![0.0])], 1.0).expect("valid space")
    }

    fn trajectory(&self, q0: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(q0.to_vec())
    }
}

/// `e^{i(kq - ħk²t/2m)}` normalised on the periodic box `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub k: f64,
    pub extent: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl PlaneWave {
    pub fn new(k: f64, extent: f64, hbar: f64, mass: f64) -> Result<Self> {
        let m = k * extent / PI;
        if (m - m.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("k={k} is not periodic on a box of half-width {extent}")));
        }
        Ok(Self { k, extent, hbar, mass })
    }
}

impl Scenario for PlaneWave {
    fn name(&self) -> &str {
        "plane_wave"
    }

    fn dim(&self) -> usize {
        1
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Schrodinger(SchrodingerCoupling {
            hbar: self.hbar,
            masses: vec![self.mass],
            charges_over_c_hbar: vec![0.0],
        })
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        let phase = self.k * q[0] - self.hbar * self.k * self.k * t / (2.0 * self.mass);
        vec![(I * phase).exp() / (2.0 * self.extent).sqrt()]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        vec![vec![I * self.k * self.psi(t, q)[0]]]
    }

    fn current(&self, _t: f64, _q: &[f64]) -> CurrentSample {
        let j0 = 1.0 / (2.0 * self.extent);
        CurrentSample::new(j0, vec![self.hbar * self.k / self.mass * j0])
    }

    fn grid(&self) -> GridSpec {
        GridSpec::cube(1, self.extent, 64.max((8.0 * self.k.abs() * self.extent / PI) as usize).next_power_of_two())
            .expect("valid grid")
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-1e3, 1e3)
    }

    fn trajectory(&self, q0: &[f64], t: f64) -> Option<Vec<f64>> {
        Some(vec![q0[0] + self.hbar * self.k / self.mass * t])
    }
}

/// Parameters of a one-dimensional Dirac packet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracPacketParams {
    pub name: String,
    pub hbar: f64,
    pub c: f64,
    pub mass: f64,
    pub sigma: f64,
    pub x0: f64,
    pub k0: f64,
    /// Constant spinor multiplying the Gaussian envelope at `t = 0`.
    pub spinor: [C; 2],
    /// Half-width of the periodic box on which the packet evolves.
    pub extent: f64,
    pub modes: usize,
}

/// Exact free Dirac evolution of a Gaussian packet on a periodic box, by a
/// sum over Fourier modes each evolved with its 2×2 matrix exponential.
#[derive(Debug, Clone)]
pub struct DiracPacket {
    params: DiracPacketParams,
    grid: GridSpec,
    wavenumbers: Vec<f64>,
    /// Normalised coefficients, two per mode.
    coeffs: Vec<[C; 2]>,
}

impl DiracPacket {
    pub fn new(params: DiracPacketParams) -> Result<Self> {
        if params.mass < 0.0 {
            return Err(Error::InvalidInput("Dirac mass must be non-negative".into()));
        }
        let grid = GridSpec::cube(1, params.extent, params.modes)?;
        let n = params.modes;
        let nrm = (params.spinor[0].norm_sqr() + params.spinor[1].norm_sqr()).sqrt();
        if nrm == 0.0 {
            return Err(Error::DegenerateDensity);
        }
        let g = Gaussian1 { hbar: 1.0, mass: 1.0, sigma: params.sigma, x0: params.x0, p0: params.k0 };
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut comps = [vec![C::new(0.0, 0.0); n], vec![C::new(0.0, 0.0); n]];
        for j in 0..n {
            let f = g.value(0.0, grid.coord(0, j));
            for s in 0..2 {
                comps[s][j] = f * params.spinor[s] / nrm;
            }
        }
        for c in comps.iter_mut() {
            fft.process(c);
        }
        let wavenumbers = grid.wavenumbers(0);
        let mut coeffs: Vec<[C; 2]> = (0..n).map(|j| [comps[0][j], comps[1][j]]).collect();
        coeffs[n / 2] = [C::new(0.0, 0.0); 2];
        let h = grid.spacing(0);
        let mass: f64 = coeffs.iter().map(|c| c[0].norm_sqr() + c[1].norm_sqr()).sum::<f64>() * h / n as f64;
        let s = 1.0 / (mass.sqrt() * n as f64);
        coeffs.iter_mut().for_each(|c| {
            c[0] *= s;
            c[1] *= s;
        });
        Ok(Self { params, grid, wavenumbers, coeffs })
    }

    pub fn params(&self) -> &DiracPacketParams {
        &self.params
    }

    /// `exp(-i h_k t / ħ)` applied to `v`, with `h_k = ħck σ_x + mc² σ_z`.
    fn evolve_mode(&self, k: f64, t: f64, v: [C; 2]) -> [C; 2] {
        let p = &self.params;
        let hx = p.hbar * p.c * k;
        let hz = p.mass * p.c * p.c;
        let e = (hx * hx + hz * hz).sqrt();
        if e == 0.0 {
            return v;
        }
        let tau = e * t / p.hbar;
        let (s, c) = tau.sin_cos();
        let (ux, uz) = (hx / e, hz / e);
        [c * v[0] - I * s * (uz * v[0] + ux * v[1]), c * v[1] - I * s * (ux * v[0] - uz * v[1])]
    }

    fn sum_modes(&self, t: f64, x: f64, derivative: bool) -> [C; 2] {
        let l = self.params.extent;
        let mut acc = [C::new(0.0, 0.0); 2];
        for (m, (&k, &c)) in self.wavenumbers.iter().zip(&self.coeffs).enumerate() {
            if m == self.coeffs.len() / 2 {
                continue;
            }
            let v = self.evolve_mode(k, t, c);
            let mut w = (I * k * (x + l)).exp();
            if derivative {
                w *= I * k;
            }
            acc[0] += v[0] * w;
            acc[1] += v[1] * w;
        }
        acc
    }
}

impl Scenario for DiracPacket {
    fn name(&self) -> &str {
        &self.params.name
    }

    fn dim(&self) -> usize {
        1
    }

    fn components(&self) -> usize {
        2
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Dirac { hbar: self.params.hbar, c: self.params.c, mass: self.params.mass }
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        self.sum_modes(t, q[0], false).to_vec()
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        vec![self.sum_modes(t, q[0], true).to_vec()]
    }

    fn grid(&self) -> GridSpec {
        self.grid.clone()
    }

    fn horizon(&self) -> f64 {
        2.0
    }

    fn window(&self) -> TimeWindow {
        let reach = (self.params.extent - 8.0 * self.params.sigma - self.params.x0.abs()).max(1.0) / self.params.c;
        TimeWindow::new(-reach, reach)
    }

    fn trajectory(&self, q0: &[f64], t: f64) -> Option<Vec<f64>> {
        let s = self.params.spinor;
        let right_mover = self.params.mass == 0.0 && (s[0] - s[1]).norm() < 1e-15;
        right_mover.then(|| vec![q0[0] + self.params.c * t])
    }
}

/// Two particles on a line in the antisymmetrised state of two free
/// Gaussians. The wavefunction vanishes on the coincidence set `{q₁ = q₂}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coincidence {
    a: Gaussian1,
    b: Gaussian1,
    norm: f64,
}

impl Coincidence {
    pub fn new(sigma: f64, separation: f64, pa: f64, pb: f64) -> Result<Self> {
        let a = Gaussian1 { hbar: 1.0, mass: 1.0, sigma, x0: -0.5 * separation, p0: pa };
        let b = Gaussian1 { hbar: 1.0, mass: 1.0, sigma, x0: 0.5 * separation, p0: pb };
        let overlap_sq = (-(separation * separation) / (4.0 * sigma * sigma) - sigma * sigma * (pa - pb).powi(2)).exp();
        if overlap_sq >= 1.0 - 1e-12 {
            return Err(Error::DegenerateDensity);
        }
        Ok(Self { a, b, norm: 1.0 / (2.0 * (1.0 - overlap_sq)).sqrt() })
    }
}

impl Scenario for Coincidence {
    fn name(&self) -> &str {
        "coincidence"
    }

    fn dim(&self) -> usize {
        2
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Schrodinger(SchrodingerCoupling::natural(2))
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        let v = self.a.value(t, q[0]) * self.b.value(t, q[1]) - self.b.value(t, q[0]) * self.a.value(t, q[1]);
        vec![v * self.norm]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        let (a1, da1) = self.a.value_and_derivative(t, q[0]);
        let (a2, da2) = self.a.value_and_derivative(t, q[1]);
        let (b1, db1) = self.b.value_and_derivative(t, q[0]);
        let (b2, db2) = self.b.value_and_derivative(t, q[1]);
        vec![vec![(da1 * b2 - db1 * a2) * self.norm], vec![(a1 * db2 - b1 * da2) * self.norm]]
    }

    fn grid(&self) -> GridSpec {
        let reach = 8.0 * self.a.width(FREE_WINDOW) + self.b.x0.abs();
        GridSpec::cube(2, reach.max(12.0), 128).expect("valid grid")
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-FREE_WINDOW, FREE_WINDOW)
    }

    fn config_space(&self) -> ConfigSpace {
        ConfigSpace::new(2, vec![SingularSubspace::coincidence(2, 0, 1).expect("valid pair")], 1.0)
            .expect("valid space")
    }
}

/// Oscillator ground state `π^{-1/4} e^{-q²/2} e^{-it/2}`, a stationary real state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicGround;

impl Scenario for HarmonicGround {
    fn name(&self) -> &str {
        "harmonic_ground"
    }

    fn dim(&self) -> usize {
        1
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Schrodinger(SchrodingerCoupling::natural(1))
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q[0] * q[0]
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        vec![PI.powf(-0.25) * (-0.5 * q[0] * q[0]).exp() * (-0.5 * I * t).exp()]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        vec![vec![-q[0] * self.psi(t, q)[0]]]
    }

    fn current(&self, _t: f64, q: &[f64]) -> CurrentSample {
        CurrentSample::new((-q[0] * q[0]).exp() / PI.sqrt(), vec![0.0])
    }

    fn grid(&self) -> GridSpec {
        GridSpec::cube(1, 12.0, 512).expect("valid grid")
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-100.0, 100.0)
    }

    fn trajectory(&self, q0: &[f64], _t: f64) -> Option<Vec<f64>> {
        Some(q0.to_vec())
    }
}

/// Coherent state of the unit oscillator displaced by `x0` at `t = 0`; the
/// packet moves rigidly along `x(t) = x0 cos t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentState {
    pub x0: f64,
}

impl CoherentState {
    fn centre(&self, t: f64) -> (f64, f64) {
        (self.x0 * t.cos(), -self.x0 * t.sin())
    }
}

impl Scenario for CoherentState {
    fn name(&self) -> &str {
        "coherent_state"
    }

    fn dim(&self) -> usize {
        1
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics::Schrodinger(SchrodingerCoupling::natural(1))
    }

    fn potential(&self, q: &[f64]) -> f64 {
        0.5 * q[0] * q[0]
    }

    fn psi(&self, t: f64, q: &[f64]) -> Vec<C> {
        let (x, p) = self.centre(t);
        let u = q[0] - x;
        vec![PI.powf(-0.25) * (-0.5 * u * u + I * (p * q[0] - 0.5 * p * x - 0.5 * t)).exp()]
    }

    fn grad_psi(&self, t: f64, q: &[f64]) -> Vec<Vec<C>> {
        let (x, p) = self.centre(t);
        vec![vec![self.psi(t, q)[0] * (-(q[0] - x) + I * p)]]
    }

    fn current(&self, t: f64, q: &[f64]) -> CurrentSample {
        let (x, p) = self.centre(t);
        let u = q[0] - x;
        let j0 = (-u * u).exp() / PI.sqrt();
        CurrentSample::new(j0, vec![p * j0])
    }

    fn grid(&self) -> GridSpec {
        GridSpec::cube(1, 12.0 + self.x0.abs(), 512).expect("valid grid")
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn window(&self) -> TimeWindow {
        TimeWindow::new(-100.0, 100.0)
    }

    fn trajectory(&self, q0: &[f64], t: f64) -> Option<Vec<f64>> {
        Some(vec![q0[0] - self.x0 + self.centre(t).0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_gaussian_matches_initial_data() {
        let s = scenario_by_name("free_gaussian", &ScenarioParams::new().with("sigma", 0.7)).unwrap();
        for &x in &[-2.0f64, -0.3, 0.0, 1.1] {
            let want = (2.0 * PI * 0.49f64).powf(-0.25) * (-x * x / (4.0 * 0.49)).exp();
            let got = s.psi(0.0, &[x])[0];
            assert!((got - C::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn hydrogenic_current_vanishes() {
        let s = scenario_by_name("hydrogenic", &ScenarioParams::new()).unwrap();
        for &x in &[-3.0, -0.1, 0.2, 5.0] {
            assert_eq!(s.current(0.7, &[x]).flux[0], 0.0);
        }
    }

    #[test]
    fn oscillator_cdf_is_normalised_and_matches_density() {
        for &t in &[0.0, 0.4, PI / 2.0] {
            assert!((OscillatorSuperposition::cdf(t, 12.0) - 1.0).abs() < 1e-14);
            let q = 0.37;
            let h = 1e-5;
            let fd = (OscillatorSuperposition::cdf(t, q + h) - OscillatorSuperposition::cdf(t, q - h)) / (2.0 * h);
            assert!((fd - OscillatorSuperposition::density(t, q)).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_scenario_and_parameter_are_rejected() {
        assert!(scenario_by_name("nope", &ScenarioParams::new()).is_err());
        assert!(scenario_by_name("free_gaussian", &ScenarioParams::new().with("omega", 1.0)).is_err());
        assert!(scenario_by_name("plane_wave", &ScenarioParams::new().with("k", 0.5)).is_err());
    }

    #[test]
    fn scenario_eval_checks_window() {
        let s = scenario_by_name("free_gaussian", &ScenarioParams::new()).unwrap();
        assert!(matches!(scenario_eval(s.as_ref(), 100.0, &[0.0]), Err(Error::OutOfDomain(_))));
        assert!(matches!(scenario_eval(s.as_ref(), 0.0, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dirac_packet_is_normalised_on_its_box() {
        let s = scenario_by_name("dirac_packet", &ScenarioParams::new()).unwrap();
        let g = s.grid();
        let mass: f64 = g.points_iter().map(|q| s.psi(0.6, &q).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>()
            * g.cell_volume();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn massless_dirac_packet_translates_at_c() {
        let s = scenario_by_name("dirac_massless", &ScenarioParams::new()).unwrap();
        for &x in &[-1.0, 0.0, 0.4] {
            let a = s.psi(0.0, &[x]);
            let b = s.psi(1.0, &[x + 1.0]);
            assert!((a[0] - b[0]).norm() < 1e-12 && (a[1] - b[1]).norm() < 1e-12);
        }
    }
}
