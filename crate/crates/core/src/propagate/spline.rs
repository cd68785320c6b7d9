//! Periodic tensor-product cubic B-spline interpolation of gridded complex data.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{GridSpec, Spectral};

type C = Complex64;

/// Converts nodal values into B-spline coefficients by dividing out the
/// symbol `(4 + 2 cos θ)/6` of the interpolation condition on every axis.
pub fn prefilter(spectral: &Spectral, values: &[C]) -> Vec<C> {
    let grid = spectral.grid();
    let mut hat = values.to_vec();
    spectral.transform(&mut hat, false);
    for (p, z) in hat.iter_mut().enumerate() {
        let idx = grid.unravel(p);
        let mut sym = 1.0;
        for (a, &j) in idx.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / grid.points[a] as f64;
            sym *= (4.0 + 2.0 * theta.cos()) / 6.0;
        }
        *z /= sym;
    }
    spectral.transform(&mut hat, true);
    hat
}

/// Per-axis stencil of one evaluation point: the four node indices and their
/// weights plus derivative weights (already divided by `h`).
#[derive(Debug, Clone)]
pub struct Stencil {
    index: Vec<[usize; 4]>,
    weight: Vec<[f64; 4]>,
    dweight: Vec<[f64; 4]>,
    strides: Vec<usize>,
}

impl Stencil {
    pub fn new(grid: &GridSpec, q: &[f64]) -> Self {
        let d = grid.dim();
        let mut index = Vec::with_capacity(d);
        let mut weight = Vec::with_capacity(d);
        let mut dweight = Vec::with_capacity(d);
        for a in 0..d {
            let n = grid.points[a] as i64;
            let h = grid.spacing(a);
            let u = (q[a] + grid.extents[a]) / h;
            let fl = u.floor();
            let t = u - fl;
            let i = fl as i64;
            let wrap = |j: i64| j.rem_euclid(n) as usize;
            index.push([wrap(i - 1), wrap(i), wrap(i + 1), wrap(i + 2)]);
            let s = 1.0 - t;
            weight.push([
                s * s * s / 6.0,
                (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
                (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
                t * t * t / 6.0,
            ]);
            dweight.push([
                -0.5 * s * s / h,
                (1.5 * t * t - 2.0 * t) / h,
                (-1.5 * t * t + t + 0.5) / h,
                0.5 * t * t / h,
            ]);
        }
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * grid.points[a + 1];
        }
        Self { index, weight, dweight, strides }
    }

    /// Interpolated value and, if requested, gradient of one coefficient array.
    pub fn eval(&self, coeffs: &[C], gradient: bool) -> (C, Vec<C>) {
        let d = self.index.len();
        let mut val = C::new(0.0, 0.0);
        let mut grad = vec![C::new(0.0, 0.0); if gradient { d } else { 0 }];
        let total = 4usize.pow(d as u32);
        let mut digits = vec![0usize; d];
        for combo in 0..total {
            let mut c = combo;
            for dg in digits.iter_mut().rev() {
                *dg = c % 4;
                c /= 4;
            }
            let mut flat = 0;
            let mut w = 1.0;
            for a in 0..d {
                flat += self.index[a][digits[a]] * self.strides[a];
                w *= self.weight[a][digits[a]];
            }
            let z = coeffs[flat];
            val += z * w;
            if gradient {
                for (g, gv) in grad.iter_mut().enumerate() {
                    let mut wg = 1.0;
                    for a in 0..d {
                        wg *= if a == g { self.dweight[a][digits[a]] } else { self.weight[a][digits[a]] };
                    }
                    *gv += z * wg;
                }
            }
        }
        (val, grad)
    }
}

/// Coefficients of one scalar array.
pub fn coefficients(grid: &GridSpec, values: &[C]) -> Result<Vec<C>> {
    Ok(prefilter(&Spectral::new(grid)?, values))
}
