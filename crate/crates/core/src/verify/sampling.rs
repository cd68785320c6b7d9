use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CellMasses;
use crate::current::CurrentProvider;
use crate::error::{Error, Result};
use crate::geometry::ConfigSpace;
use crate::trajectory::{integrate, DiagnosticRecord, IntegratorConfig, RecordMode, Status};

/// Terminal state of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: Status,
    /// Position at the horizon; `None` is the cemetery.
    pub terminal: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub diagnostics: DiagnosticRecord,
    pub error: Option<String>,
}

/// Points drawn i.i.d. from `j⁰(0, q) dq`, optionally pushed to time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub t: f64,
    pub points: Vec<Vec<f64>>,
    /// Paired with `points` after a pushforward.
    pub outcomes: Option<Vec<Outcome>>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Surviving terminal points (all points before a pushforward).
    pub fn survivors(&self) -> Vec<&[f64]> {
        match &self.outcomes {
            None => self.points.iter().map(|p| p.as_slice()).collect(),
            Some(o) => o.iter().filter_map(|o| o.terminal.as_deref()).collect(),
        }
    }

    pub fn cemetery_count(&self) -> usize {
        self.len() - self.survivors().len()
    }

    pub fn cemetery_fraction(&self) -> f64 {
        self.cemetery_count() as f64 / self.len().max(1) as f64
    }

    pub fn status_count(&self, status: Status) -> usize {
        self.outcomes.as_ref().map_or(0, |o| o.iter().filter(|o| o.status == status).count())
    }
}

fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws `n` points by inverse CDF over the support cells of `j⁰(0, ·)` and
/// uniformly within the chosen cell. Point `i` uses its own random stream, so
/// the result does not depend on scheduling.
pub fn sample_initial<P: CurrentProvider + ?Sized>(provider: &P, n: usize, seed: u64) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::InvalidInput("ensemble size must be at least 1".into()));
    }
    let cells = CellMasses::of(provider, 0.0)?;
    let mut cdf = Vec::with_capacity(cells.masses.len());
    let mut acc = 0.0;
    for m in &cells.masses {
        acc += m;
        cdf.push(acc);
    }
    let grid = &cells.grid;
    let points = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let u = rng.random::<f64>() * acc;
            let mut c = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
            while cells.masses[c] == 0.0 && c > 0 {
                c -= 1;
            }
            let mut q = cells.corner(c);
            for (a, x) in q.iter_mut().enumerate() {
                *x += rng.random::<f64>() * grid.spacing(a);
            }
            q
        })
        .collect();
    Ok(Ensemble { seed, t: 0.0, points, outcomes: None })
}

/// Integrates every member to `horizon`. Per-point failures are recorded as
/// `Rejected` outcomes rather than aborting the batch.
pub fn pushforward<P: CurrentProvider + ?Sized>(
    ens: &Ensemble,
    provider: &P,
    space: &ConfigSpace,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Ensemble> {
    if ens.outcomes.is_some() || ens.t != 0.0 {
        return Err(Error::InvalidInput("pushforward expects an ensemble at t = 0".into()));
    }
    let cfg = IntegratorConfig { record: RecordMode::Endpoints, ..cfg.clone() };
    cfg.validate(provider, space)?;
    let outcomes = ens
        .points
        .par_iter()
        .map(|q0| match integrate(provider, space, q0, horizon, &cfg) {
            Ok(tr) => Outcome {
                status: tr.status,
                terminal: (tr.status == Status::Completed).then(|| tr.final_sample().q.clone()),
                tau: tr.tau_estimate,
                diagnostics: tr.diagnostics,
                error: None,
            },
            Err(e) => Outcome {
                status: Status::Rejected,
                terminal: None,
                tau: None,
                diagnostics: DiagnosticRecord::default(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(Ensemble { seed: ens.seed, t: horizon, points: ens.points.clone(), outcomes: Some(outcomes) })
}
