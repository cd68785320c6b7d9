//! Integration of the guidance equation with event detection and the
//! divergence diagnostics accumulated along each path.

use serde::{Deserialize, Serialize};

use crate::current::{time_reverse, CurrentProvider, NodePolicy};
use crate::error::{Error, Result};
use crate::geometry::ConfigSpace;
use crate::ode::{dopri_step, initial_step, step_factor, DenseSegment, Tolerances};

/// How a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    NodeHit,
    SingularHit,
    Escaped,
    StepLimit,
    /// The start point was refused; only used in ensemble bookkeeping.
    Rejected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::NodeHit => "node_hit",
            Status::SingularHit => "singular_hit",
            Status::Escaped => "escaped",
            Status::StepLimit => "step_limit",
            Status::Rejected => "rejected",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which samples a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// Every accepted step.
    Steps,
    /// Start and end only.
    Endpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub escape_radius: f64,
    pub node_policy: NodePolicy,
    pub singular_margin: f64,
    pub max_steps: usize,
    pub record: RecordMode,
    /// Dense-output points per accepted step at which events are checked and
    /// diagnostics are accumulated.
    pub dense_checks: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.05,
            escape_radius: f64::INFINITY,
            node_policy: NodePolicy::default(),
            singular_margin: 1e-6,
            max_steps: 200_000,
            record: RecordMode::Steps,
            dense_checks: 4,
        }
    }
}

impl IntegratorConfig {
    pub fn validate<P: CurrentProvider + ?Sized>(&self, provider: &P, space: &ConfigSpace) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) || self.dense_checks == 0 || self.max_steps == 0 {
            return Err(Error::InvalidInput("max_step, dense_checks and max_steps must be positive".into()));
        }
        if !(self.escape_radius > 0.0) {
            return Err(Error::InvalidInput("escape radius must be positive".into()));
        }
        if let Some(hw) = provider.grid_half_width() {
            if self.escape_radius >= hw {
                return Err(Error::InvalidInput(format!(
                    "escape radius {} must be below the grid half-width {hw}",
                    self.escape_radius
                )));
            }
        }
        if !space.singular().is_empty() && !(self.singular_margin > 0.0) {
            return Err(Error::InvalidInput("singular margin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub j0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum EventKind {
    Node,
    Singular(usize),
    Escape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub t: f64,
}

/// Total variations accumulated along a path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    /// Variation of `log j⁰`.
    pub log_density: f64,
    /// Variation of `|Q|`.
    pub path: f64,
    /// Variation of `log dist(Q, Σ_ℓ)` inside the tube of radius `δ`, per `ℓ`.
    pub singular: Vec<f64>,
}

impl DiagnosticRecord {
    pub fn add(&mut self, other: &DiagnosticRecord) {
        self.log_density += other.log_density;
        self.path += other.path;
        for (a, b) in self.singular.iter_mut().zip(&other.singular) {
            *a += b;
        }
    }
}

/// Running total-variation sums fed with successive path points.
#[derive(Debug, Clone)]
pub struct DiagnosticAccumulator {
    record: DiagnosticRecord,
    delta: f64,
    last: Option<(f64, f64, Vec<f64>)>,
}

impl DiagnosticAccumulator {
    pub fn new(n_singular: usize, delta: f64) -> Self {
        Self { record: DiagnosticRecord { singular: vec![0.0; n_singular], ..Default::default() }, delta, last: None }
    }

    /// Adds the point with density `j0`, radius `|q|` and distances `dist`.
    pub fn push(&mut self, j0: f64, radius: f64, dist: &[f64]) {
        let logj = j0.ln();
        let clipped: Vec<f64> = dist.iter().map(|&d| d.min(self.delta).ln()).collect();
        if let Some((lj, r, ld)) = &self.last {
            self.record.log_density += (logj - lj).abs();
            self.record.path += (radius - r).abs();
            for ((acc, a), b) in self.record.singular.iter_mut().zip(ld).zip(&clipped) {
                *acc += (b - a).abs();
            }
        }
        self.last = Some((logj, radius, clipped));
    }

    pub fn record(&self) -> &DiagnosticRecord {
        &self.record
    }

    pub fn finish(self) -> DiagnosticRecord {
        self.record
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub q0: Vec<f64>,
    pub samples: Vec<TrajSample>,
    pub status: Status,
    /// Termination time when the status is not `Completed`.
    pub tau_estimate: Option<f64>,
    pub diagnostics: DiagnosticRecord,
    /// Every event that fired in the terminating interval.
    pub events: Vec<EventRecord>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Accepted step sizes (recorded in `Steps` mode only).
    pub step_sizes: Vec<f64>,
}

impl Trajectory {
    pub fn final_sample(&self) -> &TrajSample {
        self.samples.last().expect("a trajectory always has its start sample")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StageFailure {
    Node,
    Singular,
    Domain,
}

struct Probe {
    j0: f64,
    radius: f64,
    dist: Vec<f64>,
}

fn probe<P: CurrentProvider + ?Sized>(provider: &P, space: &ConfigSpace, t: f64, q: &[f64]) -> Probe {
    Probe {
        j0: provider.sample(t, q).j0,
        radius: q.iter().map(|x| x * x).sum::<f64>().sqrt(),
        dist: space.singular().iter().map(|s| s.distance(q)).collect(),
    }
}

/// Event function values: node, singular subspaces, escape. Negative means fired.
fn event_values(p: &Probe, thr: f64, cfg: &IntegratorConfig) -> Vec<(EventKind, f64)> {
    let mut g = Vec::with_capacity(p.dist.len() + 2);
    g.push((EventKind::Node, p.j0 - thr));
    for (i, d) in p.dist.iter().enumerate() {
        g.push((EventKind::Singular(i), d - cfg.singular_margin));
    }
    g.push((EventKind::Escape, cfg.escape_radius - p.radius));
    g
}

fn status_of(kind: EventKind) -> Status {
    match kind {
        EventKind::Node => Status::NodeHit,
        EventKind::Singular(_) => Status::SingularHit,
        EventKind::Escape => Status::Escaped,
    }
}

fn check_window<P: CurrentProvider + ?Sized>(provider: &P, t0: f64, t1: f64) -> Result<()> {
    let w = provider.window();
    for t in [t0, t1] {
        if !w.contains(t) {
            return Err(Error::ProviderWindow { requested: t, min: w.start, max: w.end });
        }
    }
    Ok(())
}

/// Integrates `dQ/dt = J/j⁰` from `(0, q0)` to `T`.
pub fn integrate<P: CurrentProvider + ?Sized>(
    provider: &P,
    space: &ConfigSpace,
    q0: &[f64],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_from(provider, space, q0, 0.0, horizon, cfg)
}

/// Integrates `dQ/dt = J/j⁰` from `(t0, q0)` to `t1 > t0`.
pub fn integrate_from<P: CurrentProvider + ?Sized>(
    provider: &P,
    space: &ConfigSpace,
    q0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate(provider, space)?;
    if q0.len() != provider.dim() || space.dim() != provider.dim() {
        return Err(Error::DimensionMismatch { expected: provider.dim(), found: q0.len() });
    }
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("end time {t1} must exceed start time {t0}")));
    }
    check_window(provider, t0, t1)?;
    if q0.iter().any(|x| !x.is_finite()) {
        return Err(Error::BadStart("start point is not finite".into()));
    }
    let thr = cfg.node_policy.threshold(provider);
    let start = probe(provider, space, t0, q0);
    if !(start.j0 >= thr) {
        return Err(Error::BadStart(format!("j0={:e} below node threshold {thr:e}", start.j0)));
    }
    if let Some((i, d)) = start.dist.iter().enumerate().find(|(_, &d)| d <= cfg.singular_margin) {
        return Err(Error::BadStart(format!("distance {d:e} to singular subspace {i} within margin")));
    }
    if start.radius >= cfg.escape_radius {
        return Err(Error::BadStart(format!("|q0|={} beyond escape radius", start.radius)));
    }

    let window = provider.window();
    let mut rhs = |t: f64, y: &[f64]| -> std::result::Result<Vec<f64>, StageFailure> {
        if !window.contains(t) || y.iter().any(|x| !x.is_finite()) {
            return Err(StageFailure::Domain);
        }
        if space.singular().iter().any(|s| s.distance(y) == 0.0) {
            return Err(StageFailure::Singular);
        }
        let s = provider.sample(t, y);
        if !(s.j0 >= thr) || s.j0 <= 0.0 {
            return Err(StageFailure::Node);
        }
        Ok(s.flux.iter().map(|x| x / s.j0).collect())
    };

    let tol = Tolerances { rel: cfg.rel_tol, abs: cfg.abs_tol };
    let mut t = t0;
    let mut y = q0.to_vec();
    let mut f = rhs(t, &y).map_err(|e| Error::BadStart(format!("velocity undefined at start ({e:?})")))?;
    let mut acc = DiagnosticAccumulator::new(space.singular().len(), space.delta());
    acc.push(start.j0, start.radius, &start.dist);
    let mut last_j0 = start.j0;
    let mut samples = vec![TrajSample { t, q: y.clone(), j0: start.j0 }];
    let mut h = initial_step(&y, &f, tol, cfg.max_step).min(t1 - t0);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut step_sizes = Vec::new();
    let mut events = Vec::new();
    let mut status = Status::Completed;
    let mut tau = None;
    let m = cfg.dense_checks;

    'outer: while t < t1 {
        if accepted >= cfg.max_steps {
            status = Status::StepLimit;
            tau = Some(t);
            break;
        }
        let h_min = 1e-13 * t.abs().max(1.0);
        // Inside a singular tube, keep the per-step change of log dist near 0.1.
        if !space.singular().is_empty() {
            let d_now = space.min_distance(&y);
            let speed = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d_now < space.delta() && speed > 0.0 {
                h = h.min((0.1 * d_now / speed).max(h_min));
            }
        }
        let last_step = t + h >= t1;
        let h_try = if last_step { t1 - t } else { h };
        let trial = match dopri_step(&mut rhs, t, &y, &f, h_try, tol) {
            Ok(tr) if tr.error <= 1.0 => tr,
            outcome => {
                rejected += 1;
                let fail = match &outcome {
                    Err(e) => Some(*e),
                    Ok(_) => None,
                };
                h = match &outcome {
                    Ok(tr) => h_try * step_factor(tr.error, true),
                    Err(_) => 0.5 * h_try,
                };
                if h < h_min {
                    status = match fail {
                        Some(StageFailure::Singular) => Status::SingularHit,
                        Some(StageFailure::Node) => Status::NodeHit,
                        _ if last_j0 < 1e3 * thr => Status::NodeHit,
                        _ => Status::StepLimit,
                    };
                    if status == Status::NodeHit {
                        events.push(EventRecord { kind: EventKind::Node, t });
                    }
                    tau = Some(t);
                    break;
                }
                continue;
            }
        };
        let t_new = if last_step { t1 } else { t + h_try };
        let seg =
            DenseSegment { t0: t, t1: t_new, y0: y.clone(), y1: trial.y.clone(), f0: f.clone(), f1: trial.f.clone() };

        let mut probes = Vec::with_capacity(m);
        let mut fired_at = None;
        for i in 1..=m {
            let ti = if i == m { t_new } else { t + h_try * i as f64 / m as f64 };
            let qi = if i == m { trial.y.clone() } else { seg.eval(ti) };
            let pr = probe(provider, space, ti, &qi);
            let fired = event_values(&pr, thr, cfg).iter().any(|(_, g)| *g <= 0.0);
            probes.push((ti, qi, pr));
            if fired {
                fired_at = Some(i - 1);
                break;
            }
        }

        if fired_at.is_none() && !last_step {
            let j_end = probes[m - 1].2.j0;
            let dlog = (j_end.ln() - last_j0.ln()).abs();
            if j_end.min(last_j0) < 1e3 * thr && dlog > 0.1 {
                rejected += 1;
                h = h_try * (0.09 / dlog).max(0.1);
                if h < h_min {
                    status = Status::NodeHit;
                    events.push(EventRecord { kind: EventKind::Node, t });
                    tau = Some(t);
                    break;
                }
                continue;
            }
        }

        if let Some(idx) = fired_at {
            for (_, _, pr) in &probes[..idx] {
                acc.push(pr.j0, pr.radius, &pr.dist);
            }
            let (ta, pa) = if idx == 0 {
                (t, probe(provider, space, t, &y))
            } else {
                let (ta, qa, _) = &probes[idx - 1];
                (*ta, probe(provider, space, *ta, qa))
            };
            let tb = probes[idx].0;
            let ga = event_values(&pa, thr, cfg);
            let gb = event_values(&probes[idx].2, thr, cfg);
            let mut fired = Vec::new();
            for (k, ((kind, a), (_, b))) in ga.iter().zip(&gb).enumerate() {
                if *b <= 0.0 && *a > 0.0 {
                    let te = bisect_event(provider, space, &seg, thr, cfg, k, ta, tb);
                    fired.push(EventRecord { kind: *kind, t: te });
                } else if *b <= 0.0 {
                    fired.push(EventRecord { kind: *kind, t: ta });
                }
            }
            fired.sort_by(|a, b| a.t.total_cmp(&b.t));
            let first = fired[0];
            let qe = seg.eval(first.t);
            let pe = probe(provider, space, first.t, &qe);
            if first.t > ta {
                acc.push(pe.j0.max(f64::MIN_POSITIVE), pe.radius, &pe.dist);
            }
            accepted += 1;
            if cfg.record == RecordMode::Steps {
                step_sizes.push(first.t - t);
            }
            samples.push(TrajSample { t: first.t, q: qe, j0: pe.j0 });
            status = status_of(first.kind);
            tau = Some(first.t);
            events = fired;
            break 'outer;
        }

        for (_, _, pr) in &probes {
            acc.push(pr.j0, pr.radius, &pr.dist);
        }
        accepted += 1;
        last_j0 = probes[m - 1].2.j0;
        t = t_new;
        y = trial.y;
        f = trial.f;
        if cfg.record == RecordMode::Steps {
            step_sizes.push(h_try);
            samples.push(TrajSample { t, q: y.clone(), j0: last_j0 });
        }
        let mut next = h_try * step_factor(trial.error, false);
        if last_j0 < 1e3 * thr {
            let dlog = (probes[m - 1].2.j0.ln() - probes.first().map_or(last_j0, |p| p.2.j0).ln()).abs();
            if dlog > 0.0 {
                next = next.min(h_try * 0.09 / dlog * m as f64);
            }
        }
        h = next.min(cfg.max_step);
    }

    if cfg.record == RecordMode::Endpoints || status == Status::Completed {
        let last = samples.last().expect("start sample");
        if (last.t != t || last.q != y) && status == Status::Completed {
            samples.push(TrajSample { t, q: y.clone(), j0: last_j0 });
        }
    }
    if status != Status::Completed && samples.last().is_some_and(|s| Some(s.t) != tau) {
        let te = tau.unwrap_or(t);
        let pe = probe(provider, space, te, &y);
        if te > samples.last().map_or(f64::NEG_INFINITY, |s| s.t) {
            samples.push(TrajSample { t: te, q: y.clone(), j0: pe.j0 });
        }
    }
    if cfg.record == RecordMode::Endpoints && samples.len() > 2 {
        let last = samples.pop().expect("non-empty");
        samples.truncate(1);
        samples.push(last);
    }
    Ok(Trajectory {
        q0: q0.to_vec(),
        samples,
        status,
        tau_estimate: if status == Status::Completed { None } else { tau },
        diagnostics: acc.finish(),
        events,
        accepted_steps: accepted,
        rejected_steps: rejected,
        step_sizes,
    })
}

/// First zero of event function `k` on the dense output in `[a, b]`, to
/// `1e-10` relative time.
#[allow(clippy::too_many_arguments)]
fn bisect_event<P: CurrentProvider + ?Sized>(
    provider: &P,
    space: &ConfigSpace,
    seg: &DenseSegment,
    thr: f64,
    cfg: &IntegratorConfig,
    k: usize,
    mut a: f64,
    mut b: f64,
) -> f64 {
    let tol = 1e-10 * a.abs().max(b.abs()).max(1.0);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let pr = probe(provider, space, mid, &seg.eval(mid));
        if event_values(&pr, thr, cfg)[k].1 <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

fn midpoint(a: &TrajSample, b: &TrajSample) -> (f64, Vec<f64>) {
    (0.5 * (a.t + b.t), a.q.iter().zip(&b.q).map(|(x, y)| 0.5 * (x + y)).collect())
}

/// `L = ∫ |(∂_t + v·∇) log j⁰| dt` along the recorded samples, by the
/// midpoint rule with centred differences for the derivatives.
pub fn diag_log_density_variation<P: CurrentProvider + ?Sized>(traj: &Trajectory, provider: &P) -> f64 {
    let log_j0 = |t: f64, q: &[f64]| provider.sample(t, q).j0.ln();
    traj.samples
        .windows(2)
        .map(|w| {
            let (tm, qm) = midpoint(&w[0], &w[1]);
            let dt = w[1].t - w[0].t;
            let s = provider.sample(tm, &qm);
            let et = 1e-5 * dt.min(1.0);
            let mut rate = (log_j0(tm + et, &qm) - log_j0(tm - et, &qm)) / (2.0 * et);
            let mut q = qm.clone();
            for a in 0..qm.len() {
                let eq = 1e-6 * qm[a].abs().max(1.0);
                q[a] = qm[a] + eq;
                let up = log_j0(tm, &q);
                q[a] = qm[a] - eq;
                let down = log_j0(tm, &q);
                q[a] = qm[a];
                rate += s.flux[a] / s.j0 * (up - down) / (2.0 * eq);
            }
            rate.abs() * dt
        })
        .sum()
}

/// `D = ∫ |d|Q|/dt| dt` along the recorded samples: the midpoint rule for
/// `|v · Q/|Q||` with the velocity taken from consecutive samples.
pub fn diag_path_variation(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .map(|w| {
            let (_, qm) = midpoint(&w[0], &w[1]);
            let r = qm.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r == 0.0 {
                return 0.0;
            }
            w[1].q.iter().zip(&w[0].q).zip(&qm).map(|((b, a), m)| (b - a) * m).sum::<f64>().abs() / r
        })
        .sum()
}

/// `V_ℓ = ∫ 1(dist < δ) |v · e_ℓ| / dist dt` along the recorded samples, by
/// the midpoint rule with the velocity taken from consecutive samples.
pub fn diag_singular_variation(traj: &Trajectory, space: &ConfigSpace, index: usize) -> Result<f64> {
    let sub =
        space.singular().get(index).ok_or_else(|| Error::InvalidInput(format!("no singular subspace {index}")))?;
    let delta = space.delta();
    Ok(traj
        .samples
        .windows(2)
        .map(|w| {
            let (_, qm) = midpoint(&w[0], &w[1]);
            match sub.distance_and_direction(&qm) {
                (dist, Some(e)) if dist < delta => {
                    w[1].q.iter().zip(&w[0].q).zip(&e).map(|((b, a), e)| (b - a) * e).sum::<f64>().abs() / dist
                }
                _ => 0.0,
            }
        })
        .sum())
}

/// Integral curve of the space-time field `j` parameterised by `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurve {
    pub s: Vec<f64>,
    /// `γ(s) = (t, q)`.
    pub gamma: Vec<Vec<f64>>,
    /// `dγ/ds = j(γ)`.
    pub tangent: Vec<Vec<f64>>,
    pub status: Status,
    pub step_sizes: Vec<f64>,
}

impl SCurve {
    fn segment(&self, i: usize) -> DenseSegment {
        DenseSegment {
            t0: self.s[i],
            t1: self.s[i + 1],
            y0: self.gamma[i].clone(),
            y1: self.gamma[i + 1].clone(),
            f0: self.tangent[i].clone(),
            f1: self.tangent[i + 1].clone(),
        }
    }

    /// `γ(s)` by dense output (clamped to the computed range).
    pub fn gamma_at(&self, s: f64) -> Vec<f64> {
        let n = self.s.len();
        if n == 1 || s <= self.s[0] {
            return self.gamma[0].clone();
        }
        if s >= self.s[n - 1] {
            return self.gamma[n - 1].clone();
        }
        let i = self.s.partition_point(|&x| x <= s) - 1;
        self.segment(i).eval(s)
    }

    pub fn t_of_s(&self, s: f64) -> f64 {
        self.gamma_at(s)[0]
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.gamma[0][0], self.gamma[self.gamma.len() - 1][0])
    }

    /// Inverse of the monotone map `s ↦ t`, by bisection.
    pub fn s_of_t(&self, t: f64) -> Option<f64> {
        let (ta, tb) = self.t_range();
        if t < ta || t > tb {
            return None;
        }
        let i = self.gamma.partition_point(|g| g[0] < t);
        if i == 0 {
            return Some(self.s[0]);
        }
        let (mut a, mut b) = (self.s[i - 1], self.s[i]);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.t_of_s(mid) < t {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * b.abs().max(1.0) {
                break;
            }
        }
        Some(0.5 * (a + b))
    }

    /// Spatial position `Γ(s(t))`.
    pub fn position_at_time(&self, t: f64) -> Option<Vec<f64>> {
        self.s_of_t(t).map(|s| self.gamma_at(s)[1..].to_vec())
    }
}

/// Integrates `dγ/ds = j(γ)` for `γ = (t, q)` from `(0, q0)` until `s_max`,
/// the end of the provider window, or an escape / singular-margin event.
pub fn integrate_s_parameterized<P: CurrentProvider + ?Sized>(
    provider: &P,
    q0: &[f64],
    s_max: f64,
    cfg: &IntegratorConfig,
) -> Result<SCurve> {
    let space = provider.config_space();
    cfg.validate(provider, space)?;
    if q0.len() != provider.dim() {
        return Err(Error::DimensionMismatch { expected: provider.dim(), found: q0.len() });
    }
    if !(s_max > 0.0) {
        return Err(Error::InvalidInput("s_max must be positive".into()));
    }
    let window = provider.window();
    if !window.contains(0.0) {
        return Err(Error::ProviderWindow { requested: 0.0, min: window.start, max: window.end });
    }
    let thr = cfg.node_policy.threshold(provider);
    let s0 = provider.sample(0.0, q0);
    if !(s0.j0 >= thr) {
        return Err(Error::BadStart(format!("j0={:e} below node threshold {thr:e}", s0.j0)));
    }
    if space.min_distance(q0) <= cfg.singular_margin {
        return Err(Error::BadStart("start within the singular margin".into()));
    }
    let mut rhs = |_s: f64, y: &[f64]| -> std::result::Result<Vec<f64>, StageFailure> {
        if !window.contains(y[0]) || y.iter().any(|x| !x.is_finite()) {
            return Err(StageFailure::Domain);
        }
        if space.singular().iter().any(|sub| sub.distance(&y[1..]) == 0.0) {
            return Err(StageFailure::Singular);
        }
        let smp = provider.sample(y[0], &y[1..]);
        let mut out = Vec::with_capacity(y.len());
        out.push(smp.j0);
        out.extend(smp.flux);
        Ok(out)
    };
    let tol = Tolerances { rel: cfg.rel_tol, abs: cfg.abs_tol };
    let mut y: Vec<f64> = std::iter::once(0.0).chain(q0.iter().copied()).collect();
    let mut f = rhs(0.0, &y).map_err(|e| Error::BadStart(format!("current undefined at start ({e:?})")))?;
    let mut s = 0.0;
    let mut out = SCurve {
        s: vec![0.0],
        gamma: vec![y.clone()],
        tangent: vec![f.clone()],
        status: Status::Completed,
        step_sizes: Vec::new(),
    };
    let mut h = initial_step(&y, &f, tol, cfg.max_step).min(s_max);
    let mut steps = 0usize;
    while s < s_max {
        if steps >= cfg.max_steps {
            out.status = Status::StepLimit;
            break;
        }
        let h_min = 1e-13 * s.abs().max(1.0);
        let h_try = h.min(s_max - s);
        match dopri_step(&mut rhs, s, &y, &f, h_try, tol) {
            Ok(tr) if tr.error <= 1.0 => {
                let r: f64 = tr.y[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                let d = space.min_distance(&tr.y[1..]);
                s += h_try;
                y = tr.y;
                f = tr.f;
                steps += 1;
                out.s.push(s);
                out.gamma.push(y.clone());
                out.tangent.push(f.clone());
                out.step_sizes.push(h_try);
                if r >= cfg.escape_radius {
                    out.status = Status::Escaped;
                    break;
                }
                if d <= cfg.singular_margin {
                    out.status = Status::SingularHit;
                    break;
                }
                h = (h_try * step_factor(tr.error, false)).min(cfg.max_step);
            }
            outcome => {
                h = match outcome {
                    Ok(tr) => h_try * step_factor(tr.error, true),
                    Err(_) => 0.5 * h_try,
                };
                if h < h_min {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Integrates forward to `T` and back under the time-reversed current;
/// returns `|Q' − q0|`.
pub fn reverse_roundtrip<P: CurrentProvider>(
    provider: &P,
    q0: &[f64],
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let space = provider.config_space().clone();
    let fwd = integrate_from(provider, &space, q0, 0.0, horizon, cfg)?;
    if fwd.status != Status::Completed {
        return Err(Error::InvalidInput(format!("forward trajectory ended with status {}", fwd.status)));
    }
    let reversed = time_reverse(provider);
    let back = integrate_from(&reversed, &space, &fwd.final_sample().q, -horizon, 0.0, cfg)?;
    if back.status != Status::Completed {
        return Err(Error::InvalidInput(format!("backward trajectory ended with status {}", back.status)));
    }
    Ok(back.final_sample().q.iter().zip(q0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}
