//! Ensemble sampling and the numerical checks built on it: equivariance of
//! the `|ψ|²` measure, transport of boxes, the global-existence condition
//! integrals, the expected-distance bound and the Hardy inequality.

mod conditions;
mod equivariance;
mod hardy;
mod sampling;
mod transport;

pub use conditions::{
    condition_integrals, default_delta, expected_distance_check, ConditionReport, ConditionSpec, DistanceCheck,
};
pub use equivariance::{equivariance_test, BinRow, ComparisonResult};
pub use hardy::{hardy_check, HardyResult};
pub use sampling::{pushforward, sample_initial, Ensemble, Outcome};
pub use transport::{transport_check, BoxRegion, TransportRow};

use crate::current::CurrentProvider;
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, GridSpec};

/// Masses of `j⁰(t, ·)` on the cells `[x_i, x_i + h)` of the provider's
/// support grid, by the midpoint rule.
#[derive(Debug, Clone)]
pub(crate) struct CellMasses {
    pub grid: GridSpec,
    pub masses: Vec<f64>,
    pub total: f64,
}

impl CellMasses {
    pub fn of<P: CurrentProvider + ?Sized>(provider: &P, t: f64) -> Result<Self> {
        let grid = provider.support().clone();
        let vol = grid.cell_volume();
        let masses: Vec<f64> = (0..grid.len())
            .map(|p| {
                let mut q = grid.point(p);
                for (a, x) in q.iter_mut().enumerate() {
                    *x += 0.5 * grid.spacing(a);
                }
                provider.sample(t, &q).j0.max(0.0) * vol
            })
            .collect();
        let total = pairwise_sum(&masses);
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateDensity);
        }
        Ok(Self { grid, masses, total })
    }

    /// Lower corner of cell `p`.
    pub fn corner(&self, p: usize) -> Vec<f64> {
        self.grid.point(p)
    }

    /// Normalised marginal masses along `axis`.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.points[axis]];
        for (p, &w) in self.masses.iter().enumerate() {
            m[self.grid.unravel(p)[axis]] += w / self.total;
        }
        m
    }
}

/// Piecewise-linear CDF of a cell histogram on one axis.
#[derive(Debug, Clone)]
pub(crate) struct AxisCdf {
    start: f64,
    h: f64,
    cumulative: Vec<f64>,
}

impl AxisCdf {
    pub fn new(start: f64, h: f64, masses: &[f64]) -> Self {
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for m in masses {
            acc += m;
            cumulative.push(acc);
        }
        let total = acc;
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        Self { start, h, cumulative }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let u = (x - self.start) / self.h;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= n as f64 {
            return 1.0;
        }
        let i = u.floor() as usize;
        let f = u - i as f64;
        self.cumulative[i] + f * (self.cumulative[i + 1] - self.cumulative[i])
    }

    /// Smallest `x` with `F(x) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let i = self.cumulative.partition_point(|&c| c < p).clamp(1, n);
        let (lo, hi) = (self.cumulative[i - 1], self.cumulative[i]);
        let f = if hi > lo { (p - lo) / (hi - lo) } else { 0.0 };
        self.start + (i - 1) as f64 * self.h + f.clamp(0.0, 1.0) * self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_cdf_quantile_inverts_eval() {
        let c = AxisCdf::new(-1.0, 0.5, &[0.0, 1.0, 3.0, 0.0]);
        assert_eq!(c.eval(-1.0), 0.0);
        assert!((c.eval(0.0) - 0.25).abs() < 1e-15);
        for p in [0.1, 0.25, 0.5, 0.9] {
            assert!((c.eval(c.quantile(p)) - p).abs() < 1e-14);
        }
    }
}
