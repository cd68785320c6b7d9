//! Uniform spatial grids, spinor-valued fields on them, and the FFT
//! machinery shared by the propagators and the grid-backed providers.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the box `Π [-L_a, L_a)`.
///
/// Node `i` on axis `a` sits at `-L_a + i h_a` with `h_a = 2 L_a / N_a`; the
/// cell of a node is the interval of width `h_a` centred on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extents: Vec<f64>,
    pub points: Vec<usize>,
    pub periodic: Vec<bool>,
}

impl GridSpec {
    pub fn new(extents: Vec<f64>, points: Vec<usize>, periodic: Vec<bool>) -> Result<Self> {
        if extents.is_empty() || extents.len() != points.len() || points.len() != periodic.len() {
            return Err(Error::InvalidInput(format!(
                "grid axes disagree: {} extents, {} point counts, {} periodic flags",
                extents.len(),
                points.len(),
                periodic.len()
            )));
        }
        if let Some(n) = points.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidInput(format!("grid needs at least 4 points per axis, got {n}")));
        }
        if extents.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidInput("grid half-widths must be finite and positive".into()));
        }
        Ok(Self { extents, points, periodic })
    }

    /// Periodic grid with the same half-width and point count on every axis.
    pub fn cube(dim: usize, extent: f64, points: usize) -> Result<Self> {
        Self::new(vec![extent; dim], vec![points; dim], vec![true; dim])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.extents[axis] / self.points[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -self.extents[axis] + i as f64 * self.spacing(axis)
    }

    /// Smallest half-width over all axes.
    pub fn half_width(&self) -> f64 {
        self.extents.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.points[a];
            flat /= self.points[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.points).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat).iter().enumerate().map(|(a, &i)| self.coord(a, i)).collect()
    }

    pub fn points_iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |p| self.point(p))
    }

    /// Angular wave numbers of the discrete Fourier modes on `axis`, in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let base = 2.0 * PI / (2.0 * self.extents[axis]);
        (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * base
            })
            .collect()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().zip(&self.extents).all(|(&x, &l)| x >= -l && x < l)
    }
}

/// A `k`-component complex field sampled on a grid at one instant.
///
/// Storage is component-major: component `s` occupies
/// `data[s * n .. (s + 1) * n]` with `n = grid.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub grid: GridSpec,
    pub components: usize,
    pub data: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        let n = grid.len() * components;
        Self { grid, components, data: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Samples `f(q)` at every node; `f` must return `components` values.
    pub fn from_fn<F>(grid: GridSpec, components: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<Complex64>,
    {
        let n = grid.len();
        let mut out = Self::zeros(grid, components);
        for p in 0..n {
            let q = out.grid.point(p);
            let v = f(&q);
            if v.len() != components {
                return Err(Error::DimensionMismatch { expected: components, found: v.len() });
            }
            for (s, z) in v.into_iter().enumerate() {
                out.data[s * n + p] = z;
            }
        }
        Ok(out)
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    pub fn component(&self, s: usize) -> &[Complex64] {
        let n = self.n_points();
        &self.data[s * n..(s + 1) * n]
    }

    pub fn component_mut(&mut self, s: usize) -> &mut [Complex64] {
        let n = self.n_points();
        &mut self.data[s * n..(s + 1) * n]
    }

    pub fn at(&self, p: usize) -> Vec<Complex64> {
        let n = self.n_points();
        (0..self.components).map(|s| self.data[s * n + p]).collect()
    }

    /// `∫ |ψ|² dq` by the grid rule.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sq();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::DegenerateDensity);
        }
        let s = 1.0 / n.sqrt();
        self.data.iter_mut().for_each(|z| *z *= s);
        Ok(())
    }

    pub fn same_shape(&self, other: &SpinorField) -> bool {
        self.grid == other.grid && self.components == other.components
    }
}

/// Cached FFT plans for every axis of a grid.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        if grid.periodic.iter().any(|&p| !p) {
            return Err(Error::InvalidInput("spectral operations need a periodic grid".into()));
        }
        let mut planner = FftPlanner::new();
        let forward = grid.points.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let wavenumbers = (0..grid.dim()).map(|a| grid.wavenumbers(a)).collect();
        Ok(Self { grid: grid.clone(), forward, inverse, wavenumbers })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// In-place d-dimensional transform of one scalar array. The inverse is
    /// normalised so that `inverse(forward(x)) == x`.
    pub fn transform(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.grid.len());
        let dims = &self.grid.points;
        let total = data.len();
        let mut line = Vec::new();
        for axis in 0..dims.len() {
            self.transform_axis(data, axis, inverse, &mut line);
        }
        if inverse {
            let s = 1.0 / total as f64;
            data.iter_mut().for_each(|z| *z *= s);
        }
    }

    /// Unnormalised transform along a single axis.
    pub fn transform_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool, line: &mut Vec<Complex64>) {
        let dims = &self.grid.points;
        let n = dims[axis];
        let stride: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
        line.resize(n, Complex64::new(0.0, 0.0));
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (i, z) in line.iter_mut().enumerate() {
                    *z = data[base + i * stride];
                }
                plan.process(line);
                for (i, z) in line.iter().enumerate() {
                    data[base + i * stride] = *z;
                }
            }
        }
    }

    /// Wave-vector component along `axis` of the Fourier mode with flat index `flat`.
    pub fn k_at(&self, flat: usize, axis: usize) -> f64 {
        let dims = &self.grid.points;
        let stride: usize = dims[axis + 1..].iter().product();
        self.wavenumbers[axis][(flat / stride) % dims[axis]]
    }

    /// Spectral derivative along `axis` of a scalar array (Nyquist mode dropped).
    pub fn derivative(&self, data: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut hat = data.to_vec();
        self.transform(&mut hat, false);
        self.derivative_of_hat(&hat, axis)
    }

    /// Same as [`Spectral::derivative`] but starting from an already transformed array.
    pub fn derivative_of_hat(&self, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        let n_axis = self.grid.points[axis];
        let stride: usize = self.grid.points[axis + 1..].iter().product();
        let mut out: Vec<Complex64> = hat
            .iter()
            .enumerate()
            .map(|(p, &z)| {
                let j = (p / stride) % n_axis;
                if n_axis.is_multiple_of(2) && j == n_axis / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    z * Complex64::new(0.0, self.wavenumbers[axis][j])
                }
            })
            .collect();
        self.transform(&mut out, true);
        out
    }
}

/// Pairwise (cascade) summation, used wherever reductions must not depend on
/// evaluation order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_axes() {
        assert!(GridSpec::new(vec![1.0], vec![3], vec![true]).is_err());
        assert!(GridSpec::new(vec![1.0, 1.0], vec![8], vec![true]).is_err());
        assert!(GridSpec::new(vec![0.0], vec![8], vec![true]).is_err());
    }

    #[test]
    fn ravel_roundtrip_and_coords() {
        let g = GridSpec::new(vec![1.0, 2.0], vec![4, 8], vec![true, true]).unwrap();
        for p in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(p)), p);
        }
        assert_eq!(g.point(0), vec![-1.0, -2.0]);
        assert_eq!(g.point(g.ravel(&[2, 4])), vec![0.0, 0.0]);
        assert!((g.cell_volume() - 0.5 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn spectral_derivative_of_single_mode_is_exact() {
        let g = GridSpec::cube(1, PI, 32).unwrap();
        let sp = Spectral::new(&g).unwrap();
        let f: Vec<Complex64> = g.points_iter().map(|q| Complex64::new(0.0, 3.0 * q[0]).exp()).collect();
        let df = sp.derivative(&f, 0);
        for (a, b) in df.iter().zip(&f) {
            assert!((a - b * Complex64::new(0.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn transform_roundtrip_2d() {
        let g = GridSpec::new(vec![1.0, 3.0], vec![8, 16], vec![true, true]).unwrap();
        let sp = Spectral::new(&g).unwrap();
        let orig: Vec<Complex64> = (0..g.len()).map(|p| Complex64::new(p as f64, (p * p % 7) as f64)).collect();
        let mut x = orig.clone();
        sp.transform(&mut x, false);
        sp.transform(&mut x, true);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
