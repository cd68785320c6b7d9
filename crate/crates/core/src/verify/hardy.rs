use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SingularSubspace;
use crate::grid::{pairwise_sum, Spectral, SpinorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyResult {
    /// `∫ |φ|² / (4 dist²)`.
    pub lhs: f64,
    /// `∫ |∇φ|²`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Both sides of `∫ |φ|²/(4 dist(q, S)²) ≤ ∫ |∇φ|²` for a codimension-3
/// subspace `S`. The gradient is spectral; the left side is sampled on the
/// grid shifted by half a cell (via a Fourier phase) so that no node sits on
/// a lattice-aligned subspace. Cells close to the subspace use the cell
/// average of the weight, refined by recursive bisection.
pub fn hardy_check(phi: &SpinorField, sub: &SingularSubspace) -> Result<HardyResult> {
    if sub.codimension() != 3 {
        return Err(Error::WrongCodimension { found: sub.codimension() });
    }
    let grid = &phi.grid;
    if sub.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), found: sub.dim() });
    }
    let sp = Spectral::new(grid)?;
    let d = grid.dim();
    let n = phi.n_points();
    let vol = grid.cell_volume();
    let shift: Vec<f64> = (0..d).map(|a| 0.5 * grid.spacing(a)).collect();
    let spacing: Vec<f64> = (0..d).map(|a| grid.spacing(a)).collect();
    let depth = 10usize.saturating_sub(3 * (d - 3)).max(2);
    let mut inv_dist2 = Vec::with_capacity(n);
    for p in 0..n {
        let mut q = grid.point(p);
        for (x, s) in q.iter_mut().zip(&shift) {
            *x += s;
        }
        inv_dist2.push(cell_weight(sub, &q, &spacing, depth) / vol);
    }
    let mut lhs_terms = Vec::with_capacity(n * phi.components);
    let mut rhs_terms = Vec::with_capacity(n * phi.components * d);
    for s in 0..phi.components {
        let mut hat = phi.component(s).to_vec();
        sp.transform(&mut hat, false);
        for a in 0..d {
            rhs_terms.extend(sp.derivative_of_hat(&hat, a).iter().map(|z| z.norm_sqr() * vol));
        }
        let mut shifted: Vec<Complex64> = hat
            .iter()
            .enumerate()
            .map(|(p, z)| {
                let phase: f64 = (0..d).map(|a| sp.k_at(p, a) * shift[a]).sum();
                z * Complex64::from_polar(1.0, phase)
            })
            .collect();
        sp.transform(&mut shifted, true);
        lhs_terms.extend(shifted.iter().zip(&inv_dist2).map(|(z, w)| z.norm_sqr() * w * vol));
    }
    let lhs = pairwise_sum(&lhs_terms);
    let rhs = pairwise_sum(&rhs_terms);
    if !(rhs > 0.0) {
        return Err(Error::InvalidInput("test function has vanishing gradient".into()));
    }
    Ok(HardyResult { lhs, rhs, ratio: lhs / rhs })
}

/// `∫_cell 1/(4 dist²)` over the cell centred at `centre`.
fn cell_weight(sub: &SingularSubspace, centre: &[f64], h: &[f64], depth: usize) -> f64 {
    let dist = sub.distance(centre);
    let vol: f64 = h.iter().product();
    let diag = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dist > 2.0 * diag || depth == 0 {
        return if dist > 0.0 { vol / (4.0 * dist * dist) } else { 0.0 };
    }
    let d = h.len();
    let half: Vec<f64> = h.iter().map(|x| 0.5 * x).collect();
    let mut q = centre.to_vec();
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        for a in 0..d {
            let sign = if corner >> a & 1 == 1 { 0.5 } else { -0.5 };
            q[a] = centre[a] + sign * half[a];
        }
        acc += cell_weight(sub, &q, &half, depth - 1);
    }
    acc
}
