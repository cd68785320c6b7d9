use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::current::CurrentProvider;
use crate::error::{Error, Result};
use crate::geometry::{ConfigSpace, SingularSubspace};
use crate::grid::pairwise_sum;
use crate::trajectory::Status;

/// Discretisation of the condition integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    /// Lattice spacing.
    pub h: f64,
    /// Time-cell width.
    pub dt: f64,
    /// Sub-samples per axis used to weight cells cut by the ball boundary.
    pub mask_subsamples: usize,
    /// Tube radius per singular subspace; defaults to [`default_delta`].
    pub delta: Option<Vec<f64>>,
    /// Cells with `j⁰ < epsilon_node · scale` are excluded from the node integral.
    pub epsilon_node: f64,
}

impl ConditionSpec {
    pub fn new(h: f64, dt: f64) -> Self {
        Self { h, dt, mask_subsamples: 4, delta: None, epsilon_node: 1e-9 }
    }

    /// Same spec with `h` and `dt` halved.
    pub fn refined(&self) -> Self {
        Self { h: 0.5 * self.h, dt: 0.5 * self.dt, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `∫∫ |(∂_t + (J/j⁰)·∇) j⁰|` outside node cells.
    pub i_node: f64,
    /// `∫∫ |J · q/|q||`.
    pub i_escape: f64,
    /// `∫∫ 1(dist < δ_ℓ) |J · e_ℓ| / dist`, per singular subspace.
    pub i_singular: Vec<f64>,
    pub delta: Vec<f64>,
    /// `∫∫ |J|`, the bound on the expected path length.
    pub ed_bound: f64,
    pub radius: f64,
    pub horizon: f64,
    pub h: f64,
    pub dt: f64,
    pub mask_subsamples: usize,
    /// `∫∫ j⁰` over the excluded node cells.
    pub excluded_node_mass: f64,
}

/// Half the smallest distance from the effective support of `j⁰(0, ·)`
/// (nodes with `j⁰ ≥ 1e-3 · scale`) to each singular subspace, clamped to
/// `[min grid spacing, 1]`.
pub fn default_delta<P: CurrentProvider + ?Sized>(provider: &P, space: &ConfigSpace) -> Vec<f64> {
    let grid = provider.support();
    let floor = (0..grid.dim()).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
    let cut = 1e-3 * provider.density_scale();
    let support: Vec<Vec<f64>> = grid.points_iter().filter(|q| provider.sample(0.0, q).j0 >= cut).collect();
    space
        .singular()
        .iter()
        .map(|s| {
            let d_min = support.iter().map(|q| s.distance(q)).fold(f64::INFINITY, f64::min);
            (0.5 * d_min).clamp(floor, 1.0)
        })
        .collect()
}

struct Cell {
    centre: Vec<f64>,
    weight: f64,
    radial: Vec<f64>,
    singular: Vec<Option<TubePart>>,
}

/// The part of a cell inside both the ball and one singular tube.
struct TubePart {
    /// Centroid of the part; the integrand is evaluated here.
    point: Vec<f64>,
    dist: f64,
    normal: Vec<f64>,
    weight: f64,
}

/// Offsets of an `n^dim` midpoint sub-lattice of a cell of width `h`.
fn sub_points(centre: &[f64], h: f64, n: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let dim = centre.len();
    (0..n.pow(dim as u32)).map(move |s| {
        let mut rest = s;
        centre
            .iter()
            .map(|c| {
                let k = rest % n;
                rest /= n;
                c + ((k as f64 + 0.5) / n as f64 - 0.5) * h
            })
            .collect()
    })
}

fn in_ball(x: &[f64], r: f64) -> bool {
    x.iter().map(|v| v * v).sum::<f64>().sqrt() <= r
}

/// Ball-and-tube part of a cell. Cells cut by the tube boundary are resampled
/// on a finer sub-lattice (up to 4096 points) and evaluated at the centroid of
/// the part inside.
fn tube_part(centre: &[f64], h: f64, r: f64, subs: usize, sub: &SingularSubspace, delta: f64) -> Option<TubePart> {
    let dim = centre.len();
    let vol = h.powi(dim as i32);
    let diag = h * (dim as f64).sqrt();
    let centre_dist = sub.distance(centre);
    if centre_dist >= delta + diag {
        return None;
    }
    let full = centre_dist + diag < delta;
    let n = if full { subs } else { subs.max((4096f64.powf(1.0 / dim as f64)).floor() as usize) };
    let mut count = 0usize;
    let mut sum = vec![0.0; dim];
    for x in sub_points(centre, h, n) {
        if in_ball(&x, r) && sub.distance(&x) < delta {
            count += 1;
            for (acc, v) in sum.iter_mut().zip(&x) {
                *acc += v;
            }
        }
    }
    if count == 0 {
        return None;
    }
    let point = if full { centre.to_vec() } else { sum.iter().map(|v| v / count as f64).collect() };
    let (dist, dir) = sub.distance_and_direction(&point);
    dir.map(|normal| TubePart { point, dist, normal, weight: vol * count as f64 / n.pow(dim as u32) as f64 })
}

/// Lattice cells centred at `(i + 0.5 + 0.1·axis)·h` that meet the ball of
/// radius `r`, weighted by the sub-sampled fraction of the cell inside it.
fn ball_cells(dim: usize, r: f64, h: f64, subs: usize, space: &ConfigSpace, delta: &[f64]) -> Vec<Cell> {
    let lo = (-r / h - 1.6).floor() as i64;
    let hi = (r / h + 1.0).ceil() as i64;
    let span = (hi - lo + 1) as usize;
    let total = span.pow(dim as u32);
    let sub_total = subs.pow(dim as u32);
    let vol = h.powi(dim as i32);
    let mut cells = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let mut centre = vec![0.0; dim];
        for a in (0..dim).rev() {
            let i = lo + (rest % span) as i64;
            rest /= span;
            centre[a] = (i as f64 + 0.5 + 0.1 * a as f64) * h;
        }
        let near = centre.iter().map(|x| (x.abs() - 0.5 * h).max(0.0).powi(2)).sum::<f64>().sqrt();
        if near > r {
            continue;
        }
        let inside = sub_points(&centre, h, subs).filter(|x| in_ball(x, r)).count();
        if inside == 0 {
            continue;
        }
        let norm = centre.iter().map(|x| x * x).sum::<f64>().sqrt();
        let radial = centre.iter().map(|x| x / norm).collect();
        let singular =
            space.singular().iter().zip(delta).map(|(sub, &dl)| tube_part(&centre, h, r, subs, sub, dl)).collect();
        cells.push(Cell { centre, weight: vol * inside as f64 / sub_total as f64, radial, singular });
    }
    cells
}

/// Evaluates the node, escape and singular-set condition integrals and the
/// expected-distance bound over `[0, T] × ball(R)` by midpoint quadrature on
/// a fixed space-time lattice, with centred differences of step `dt/2` and
/// `h/2`. Cells are fixed independently of `R` and `T` and weighted by their
/// overlap, so every integral is monotone in both.
pub fn condition_integrals<P: CurrentProvider + ?Sized>(
    provider: &P,
    space: &ConfigSpace,
    radius: f64,
    horizon: f64,
    spec: &ConditionSpec,
) -> Result<ConditionReport> {
    if !(radius > 0.0 && horizon > 0.0 && spec.h > 0.0 && spec.dt > 0.0) || spec.mask_subsamples == 0 {
        return Err(Error::InvalidInput("radius, horizon, h, dt and mask_subsamples must be positive".into()));
    }
    if space.dim() != provider.dim() {
        return Err(Error::DimensionMismatch { expected: provider.dim(), found: space.dim() });
    }
    let delta = match &spec.delta {
        Some(d) if d.len() == space.singular().len() && d.iter().all(|x| *x > 0.0) => d.clone(),
        Some(_) => return Err(Error::InvalidInput("one positive delta per singular subspace required".into())),
        None => default_delta(provider, space),
    };
    let n_t = ((horizon / spec.dt) - 1e-12).ceil().max(1.0) as usize;
    let window = provider.window();
    let t_end = n_t as f64 * spec.dt;
    if !window.contains(0.0) || !window.contains(t_end) {
        return Err(Error::WindowExceeded(format!(
            "time cells span [0, {t_end}] but the provider window is [{}, {}]",
            window.start, window.end
        )));
    }
    let d = provider.dim();
    let h = spec.h;
    let cells = ball_cells(d, radius, h, spec.mask_subsamples, space, &delta);
    let node_cut = spec.epsilon_node * provider.density_scale();
    let n_sing = delta.len();

    // Per time cell: [node, escape, ed, excluded, singular...].
    let per_time: Vec<Vec<f64>> = (0..n_t)
        .into_par_iter()
        .map(|n| {
            let t0 = n as f64 * spec.dt;
            let wt = (t0 + spec.dt).min(horizon) - t0;
            let tm = t0 + 0.5 * spec.dt;
            let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(cells.len()); 4 + n_sing];
            for c in &cells {
                let w = c.weight * wt;
                let s = provider.sample(tm, &c.centre);
                let jn = s.flux_norm();
                cols[2].push(jn * w);
                cols[1].push(s.flux.iter().zip(&c.radial).map(|(j, e)| j * e).sum::<f64>().abs() * w);
                for (l, sing) in c.singular.iter().enumerate() {
                    if let Some(part) = sing {
                        let flux =
                            if part.point == c.centre { s.flux.clone() } else { provider.sample(tm, &part.point).flux };
                        let je: f64 = flux.iter().zip(&part.normal).map(|(j, e)| j * e).sum();
                        cols[4 + l].push(je.abs() / part.dist * part.weight * wt);
                    }
                }
                if s.j0 < node_cut {
                    cols[3].push(s.j0.max(0.0) * w);
                    continue;
                }
                let dtj = (provider.sample(tm + 0.5 * spec.dt, &c.centre).j0
                    - provider.sample(tm - 0.5 * spec.dt, &c.centre).j0)
                    / spec.dt;
                let mut q = c.centre.clone();
                let mut adv = 0.0;
                for a in 0..d {
                    q[a] = c.centre[a] + 0.5 * h;
                    let up = provider.sample(tm, &q).j0;
                    q[a] = c.centre[a] - 0.5 * h;
                    let down = provider.sample(tm, &q).j0;
                    q[a] = c.centre[a];
                    adv += s.flux[a] / s.j0 * (up - down) / h;
                }
                cols[0].push((dtj + adv).abs() * w);
            }
            cols.iter().map(|v| pairwise_sum(v)).collect()
        })
        .collect();
    let total = |k: usize| pairwise_sum(&per_time.iter().map(|v| v[k]).collect::<Vec<_>>());
    Ok(ConditionReport {
        i_node: total(0),
        i_escape: total(1),
        i_singular: (0..n_sing).map(|l| total(4 + l)).collect(),
        delta,
        ed_bound: total(2),
        radius,
        horizon,
        h,
        dt: spec.dt,
        mask_subsamples: spec.mask_subsamples,
        excluded_node_mass: total(3),
    })
}

/// Ensemble mean of the path variation `D` against the bound `∫∫ |J|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCheck {
    pub mean_d: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `(bound − mean_d) / std_error`; infinite when the standard error vanishes.
    pub margin_sigmas: f64,
    pub samples: usize,
}

impl DistanceCheck {
    /// The bound holds within three standard errors.
    pub fn holds(&self) -> bool {
        self.margin_sigmas >= -3.0
    }
}

pub fn expected_distance_check(ens: &Ensemble, report: &ConditionReport) -> DistanceCheck {
    let ds: Vec<f64> =
        ens.outcomes.iter().flatten().filter(|o| o.status != Status::Rejected).map(|o| o.diagnostics.path).collect();
    let n = ds.len();
    let mean = if n == 0 { 0.0 } else { pairwise_sum(&ds) / n as f64 };
    let var = if n < 2 {
        0.0
    } else {
        pairwise_sum(&ds.iter().map(|x| (x - mean).powi(2)).collect::<Vec<_>>()) / (n - 1) as f64
    };
    let se = (var / n.max(1) as f64).sqrt();
    let gap = report.ed_bound - mean;
    let margin = if se > 0.0 {
        gap / se
    } else if gap >= 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    DistanceCheck { mean_d: mean, std_error: se, bound: report.ed_bound, margin_sigmas: margin, samples: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::current::{LinearFlowProvider, StaticProvider};
    use crate::grid::GridSpec;

    #[test]
    fn static_density_has_zero_integrals() {
        let g = GridSpec::cube(2, 6.0, 32).unwrap();
        let p = StaticProvider::new(g, |q| (-q[0] * q[0] - q[1] * q[1]).exp()).unwrap();
        let r = condition_integrals(&p, &ConfigSpace::euclidean(2), 3.0, 1.0, &ConditionSpec::new(0.2, 0.1)).unwrap();
        assert_eq!((r.i_node, r.i_escape, r.ed_bound), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ball_weights_approximate_its_area() {
        let cells = ball_cells(2, 1.3, 0.05, 4, &ConfigSpace::euclidean(2), &[]);
        let area: f64 = cells.iter().map(|c| c.weight).sum();
        assert!((area - std::f64::consts::PI * 1.69).abs() < 2e-3, "{area}");
    }

    #[test]
    fn integrals_grow_with_radius_and_horizon() {
        let p = LinearFlowProvider::new(2, 0.4, 1.0, 8.0, 32).unwrap();
        let s = ConfigSpace::euclidean(2);
        let spec = ConditionSpec::new(0.25, 0.1);
        let a = condition_integrals(&p, &s, 1.5, 0.55, &spec).unwrap();
        let b = condition_integrals(&p, &s, 2.0, 0.55, &spec).unwrap();
        let c = condition_integrals(&p, &s, 2.0, 0.8, &spec).unwrap();
        for (x, y) in
            [(a.ed_bound, b.ed_bound), (b.ed_bound, c.ed_bound), (a.i_escape, b.i_escape), (b.i_node, c.i_node)]
        {
            assert!(x <= y, "{x} > {y}");
        }
    }

    #[test]
    fn ed_bound_of_linear_flow_matches_closed_form() {
        // |J| = rate·|q|·j0 and the mass of |q| under a unit 2D Gaussian is √(π/2).
        let p = LinearFlowProvider::new(2, 0.4, 1.0, 10.0, 32).unwrap();
        let r = condition_integrals(&p, &ConfigSpace::euclidean(2), 9.0, 0.5, &ConditionSpec::new(0.05, 0.05)).unwrap();
        let want: f64 = (0..10)
            .map(|n| 0.05 * 0.4 * (0.4 * 0.05 * (n as f64 + 0.5)).exp() * (std::f64::consts::PI / 2.0).sqrt())
            .sum();
        assert!((r.ed_bound - want).abs() < 1e-3 * want, "{} vs {want}", r.ed_bound);
    }
}
