use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::current::CurrentProvider;
use crate::error::{Error, Result};
use crate::geometry::ConfigSpace;
use crate::grid::pairwise_sum;
use crate::quadrature::{composite_nodes, gauss_legendre, integrate as quad};
use crate::trajectory::{integrate, IntegratorConfig, RecordMode, Status};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput("box needs lower < upper on every axis".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Cube of half-width `r` around `centre`.
    pub fn around(centre: &[f64], r: f64) -> Result<Self> {
        Self::new(centre.iter().map(|c| c - r).collect(), centre.iter().map(|c| c + r).collect())
    }

    /// Counter-clockwise boundary of a 2D box with `per_side` points per side.
    fn boundary(&self, per_side: usize) -> Vec<Vec<f64>> {
        let (x0, y0, x1, y1) = (self.lower[0], self.lower[1], self.upper[0], self.upper[1]);
        let corners = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
        let mut out = Vec::with_capacity(4 * per_side);
        for s in 0..4 {
            let (a, b) = (corners[s], corners[(s + 1) % 4]);
            for i in 0..per_side {
                let u = i as f64 / per_side as f64;
                out.push(vec![a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportRow {
    /// `μ₀(B)`.
    pub initial_mass: f64,
    /// `μ_t(φ_t(B))`.
    pub transported_mass: f64,
    pub discrepancy: f64,
    /// Boundary points per box side.
    pub mesh: usize,
}

/// Transports each box through the flow and compares `μ₀(B)` with the
/// `j⁰(t, ·)` mass of its image. In one dimension the image is the interval
/// between the transported endpoints; in two dimensions it is the polygon
/// through `4·mesh` transported boundary points, integrated with Green's
/// theorem.
pub fn transport_check<P: CurrentProvider + ?Sized>(
    provider: &P,
    space: &ConfigSpace,
    boxes: &[BoxRegion],
    t: f64,
    cfg: &IntegratorConfig,
    mesh: usize,
) -> Result<Vec<TransportRow>> {
    let d = provider.dim();
    if d > 2 {
        return Err(Error::InvalidInput(format!("transport check supports d <= 2, got {d}")));
    }
    if mesh == 0 {
        return Err(Error::InvalidInput("mesh must be positive".into()));
    }
    let cfg = IntegratorConfig { record: RecordMode::Endpoints, ..cfg.clone() };
    boxes
        .iter()
        .enumerate()
        .map(|(index, b)| {
            if b.lower.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: b.lower.len() });
            }
            let start: Vec<Vec<f64>> = if d == 1 { vec![b.lower.clone(), b.upper.clone()] } else { b.boundary(mesh) };
            let moved = start
                .par_iter()
                .map(|q| {
                    let tr = integrate(provider, space, q, t, &cfg)?;
                    if tr.status != Status::Completed {
                        return Err(Error::InvalidInput(format!(
                            "boundary point {q:?} of box {index} ended with status {}",
                            tr.status
                        )));
                    }
                    Ok(tr.final_sample().q.clone())
                })
                .collect::<Result<Vec<_>>>()?;
            let density = |time: f64| move |q: &[f64]| provider.sample(time, q).j0;
            let (initial_mass, transported_mass) = if d == 1 {
                let f0 = density(0.0);
                let ft = density(t);
                (
                    quad(|x| f0(&[x]), b.lower[0], b.upper[0], 16, 8),
                    quad(|x| ft(&[x]), moved[0][0], moved[1][0], 16, 8).abs(),
                )
            } else {
                if self_intersection(&moved).is_some() {
                    return Err(Error::BoxTooLarge { index });
                }
                (box_mass(&density(0.0), b), polygon_mass(&density(t), &moved))
            };
            Ok(TransportRow {
                initial_mass,
                transported_mass,
                discrepancy: (initial_mass - transported_mass).abs(),
                mesh,
            })
        })
        .collect()
}

fn box_mass<F: Fn(&[f64]) -> f64>(f: &F, b: &BoxRegion) -> f64 {
    let xs = composite_nodes(b.lower[0], b.upper[0], 8, 8);
    let ys = composite_nodes(b.lower[1], b.upper[1], 8, 8);
    let terms: Vec<f64> = xs.iter().flat_map(|&(x, wx)| ys.iter().map(move |&(y, wy)| wx * wy * f(&[x, y]))).collect();
    pairwise_sum(&terms)
}

/// `∬ f` over a simple polygon as `∮ F dy` with `F(x, y) = ∫_{x_ref}^x f(s, y) ds`.
fn polygon_mass<F: Fn(&[f64]) -> f64>(f: &F, poly: &[Vec<f64>]) -> f64 {
    let x_ref = poly.iter().map(|p| p[0]).sum::<f64>() / poly.len() as f64;
    let (u, w) = gauss_legendre(4);
    let mut terms = Vec::with_capacity(poly.len() * u.len());
    for i in 0..poly.len() {
        let (a, b) = (&poly[i], &poly[(i + 1) % poly.len()]);
        let dy = b[1] - a[1];
        if dy == 0.0 {
            continue;
        }
        for (ui, wi) in u.iter().zip(&w) {
            let s = 0.5 * (ui + 1.0);
            let (x, y) = (a[0] + s * (b[0] - a[0]), a[1] + s * dy);
            let inner = quad(|z| f(&[z, y]), x_ref, x, 2, 8);
            terms.push(0.5 * wi * inner * dy);
        }
    }
    pairwise_sum(&terms).abs()
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// First pair of non-adjacent polygon edges that intersect.
fn self_intersection(poly: &[Vec<f64>]) -> Option<(usize, usize)> {
    let n = poly.len();
    for i in 0..n {
        let (p1, p2) = (&poly[i], &poly[(i + 1) % n]);
        for j in i + 2..n {
            if (j + 1) % n == i {
                continue;
            }
            let (p3, p4) = (&poly[j], &poly[(j + 1) % n]);
            let d1 = cross(p3, p4, p1);
            let d2 = cross(p3, p4, p2);
            let d3 = cross(p1, p2, p3);
            let d4 = cross(p1, p2, p4);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return Some((i, j));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::current::{LinearFlowProvider, StaticProvider};
    use crate::grid::GridSpec;

    #[test]
    fn static_flow_discrepancy_is_quadrature_error() {
        let g = GridSpec::cube(2, 5.0, 32).unwrap();
        let p = StaticProvider::new(g, |q| (-q[0] * q[0] - q[1] * q[1]).exp()).unwrap();
        let b = BoxRegion::around(&[0.3, -0.2], 0.4).unwrap();
        let rows =
            transport_check(&p, &ConfigSpace::euclidean(2), &[b], 1.0, &IntegratorConfig::default(), 16).unwrap();
        assert!(rows[0].discrepancy <= 1e-8, "{}", rows[0].discrepancy);
    }

    #[test]
    fn linear_flow_transports_boxes_exactly() {
        let p = LinearFlowProvider::new(2, 1.0, 1.0, 10.0, 16).unwrap();
        let b = BoxRegion::around(&[0.5, 0.2], 0.3).unwrap();
        let rows = transport_check(&p, &ConfigSpace::euclidean(2), &[b], 0.5, &IntegratorConfig::default(), 8).unwrap();
        assert!(rows[0].discrepancy <= 1e-6, "{}", rows[0].discrepancy);
        let p1 = LinearFlowProvider::new(1, 1.0, 1.0, 10.0, 16).unwrap();
        let b1 = BoxRegion::new(vec![-0.4], vec![0.9]).unwrap();
        let rows =
            transport_check(&p1, &ConfigSpace::euclidean(1), &[b1], 0.5, &IntegratorConfig::default(), 1).unwrap();
        assert!(rows[0].discrepancy <= 1e-6, "{}", rows[0].discrepancy);
    }

    #[test]
    fn crossing_polygon_is_detected() {
        let bow = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(self_intersection(&bow).is_some());
        let square = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert!(self_intersection(&square).is_none());
    }
}
