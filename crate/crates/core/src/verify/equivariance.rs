use serde::{Deserialize, Serialize};

use super::{AxisCdf, CellMasses, Ensemble};
use crate::current::CurrentProvider;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `μ_T` mass of the bin.
    pub expected: f64,
    /// Fraction of the whole ensemble (cemetery included) landing in the bin.
    pub observed: f64,
}

/// Empirical `ρ_T` against `μ_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub l1_distance: f64,
    pub ks_distance: f64,
    pub per_bin: Vec<BinRow>,
    pub n_effective: usize,
    pub n_total: usize,
    pub cemetery_fraction: f64,
    /// Bins where `ρ_T` exceeds `μ_T` by more than three binomial standard errors.
    pub dominance_violations: usize,
}

/// Histograms the survivors of `ens` in bins of equal `μ_T` mass and compares
/// them with `μ_T`. In one dimension the bins are quantile intervals; in
/// higher dimension they are products of per-axis marginal quantile intervals
/// (`round(bins^(1/d))` per axis) and KS is the largest marginal distance.
pub fn equivariance_test<P: CurrentProvider + ?Sized>(
    ens: &Ensemble,
    provider: &P,
    horizon: f64,
    bins: usize,
) -> Result<ComparisonResult> {
    let survivors = ens.survivors();
    if survivors.len() < 100 {
        return Err(Error::TooFewSurvivors { survivors: survivors.len(), required: 100 });
    }
    if bins == 0 {
        return Err(Error::InvalidInput("bin count must be positive".into()));
    }
    let cells = CellMasses::of(provider, horizon)?;
    let grid = &cells.grid;
    let d = grid.dim();
    let per_axis = if d == 1 { bins } else { ((bins as f64).powf(1.0 / d as f64).round() as usize).max(1) };
    let n = ens.len() as f64;

    let cdfs: Vec<AxisCdf> =
        (0..d).map(|a| AxisCdf::new(grid.coord(a, 0), grid.spacing(a), &cells.marginal(a))).collect();
    let edges: Vec<Vec<f64>> =
        cdfs.iter().map(|c| (1..per_axis).map(|k| c.quantile(k as f64 / per_axis as f64)).collect()).collect();

    let n_bins = per_axis.pow(d as u32);
    let bin_of = |q: &[f64]| -> usize {
        let mut flat = 0;
        for a in 0..d {
            flat = flat * per_axis + edges[a].partition_point(|&e| e <= q[a]);
        }
        flat
    };

    let mut counts = vec![0usize; n_bins];
    for q in &survivors {
        counts[bin_of(q)] += 1;
    }

    let expected =
        if d == 1 { vec![1.0 / per_axis as f64; per_axis] } else { joint_bin_masses(&cells, &edges, per_axis) };

    let bounds = |a: usize, k: usize| -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { edges[a][k - 1] };
        let hi = if k + 1 == per_axis { f64::INFINITY } else { edges[a][k] };
        (lo, hi)
    };
    let mut per_bin = Vec::with_capacity(n_bins);
    let mut l1 = 0.0;
    let mut violations = 0;
    for b in 0..n_bins {
        let mut rest = b;
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = rest % per_axis;
            rest /= per_axis;
        }
        let (lower, upper): (Vec<f64>, Vec<f64>) = idx.iter().enumerate().map(|(a, &k)| bounds(a, k)).unzip();
        let observed = counts[b] as f64 / n;
        let mu = expected[b];
        l1 += (observed - mu).abs();
        if observed > mu + 3.0 * (mu * (1.0 - mu) / n).sqrt() {
            violations += 1;
        }
        per_bin.push(BinRow { lower, upper, expected: mu, observed });
    }

    let mut ks = 0.0f64;
    for (a, cdf) in cdfs.iter().enumerate() {
        let mut xs: Vec<f64> = survivors.iter().map(|q| q[a]).collect();
        xs.sort_by(f64::total_cmp);
        for (i, &x) in xs.iter().enumerate() {
            let f = cdf.eval(x);
            ks = ks.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
    }

    Ok(ComparisonResult {
        l1_distance: l1,
        ks_distance: ks.min(1.0),
        per_bin,
        n_effective: survivors.len(),
        n_total: ens.len(),
        cemetery_fraction: ens.cemetery_fraction(),
        dominance_violations: violations,
    })
}

/// `μ_T` masses of product bins, spreading every cell's mass uniformly.
fn joint_bin_masses(cells: &CellMasses, edges: &[Vec<f64>], per_axis: usize) -> Vec<f64> {
    let grid = &cells.grid;
    let d = grid.dim();
    // overlap[a][i] lists (bin, fraction of cell i along axis a in that bin).
    let overlap: Vec<Vec<Vec<(usize, f64)>>> = (0..d)
        .map(|a| {
            let h = grid.spacing(a);
            (0..grid.points[a])
                .map(|i| {
                    let lo = grid.coord(a, i);
                    let hi = lo + h;
                    let mut out = Vec::new();
                    let mut k = edges[a].partition_point(|&e| e <= lo);
                    let mut left = lo;
                    loop {
                        let right = if k < edges[a].len() { edges[a][k].min(hi) } else { hi };
                        if right > left {
                            out.push((k, (right - left) / h));
                        }
                        if right >= hi {
                            break;
                        }
                        left = right;
                        k += 1;
                    }
                    out
                })
                .collect()
        })
        .collect();
    let mut mass = vec![0.0; per_axis.pow(d as u32)];
    for (p, &m) in cells.masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let idx = grid.unravel(p);
        let lists: Vec<&Vec<(usize, f64)>> = (0..d).map(|a| &overlap[a][idx[a]]).collect();
        let mut pos = vec![0usize; d];
        'odometer: loop {
            let mut flat = 0;
            let mut w = m / cells.total;
            for a in 0..d {
                let (k, f) = lists[a][pos[a]];
                flat = flat * per_axis + k;
                w *= f;
            }
            mass[flat] += w;
            let mut a = d;
            loop {
                if a == 0 {
                    break 'odometer;
                }
                a -= 1;
                pos[a] += 1;
                if pos[a] < lists[a].len() {
                    continue 'odometer;
                }
                pos[a] = 0;
            }
        }
    }
    mass
}
