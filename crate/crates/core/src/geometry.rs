//! Configuration-space geometry: affine singular subspaces and their
//! distance functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-12;

/// Affine subspace `Σ = {q : n_j · (q - anchor) = 0 for every normal n_j}`.
///
/// The distance `|y(q) - a|` with `y_j(q) = n_j · q` and `a_j = n_j · anchor`
/// is smooth away from `Σ`, so every such set is admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSubspace {
    anchor: Vec<f64>,
    normals: Vec<Vec<f64>>,
}

impl SingularSubspace {
    pub fn new(anchor: Vec<f64>, normals: Vec<Vec<f64>>) -> Result<Self> {
        let d = anchor.len();
        if normals.is_empty() || normals.len() > d {
            return Err(Error::InvalidInput(format!("codimension must lie in [1, {d}], got {}", normals.len())));
        }
        for (i, n) in normals.iter().enumerate() {
            if n.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: n.len() });
            }
            for (j, m) in normals.iter().enumerate().take(i + 1) {
                let dot: f64 = n.iter().zip(m).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidInput(format!("normals {j} and {i} are not orthonormal (dot = {dot})")));
                }
            }
        }
        Ok(Self { anchor, normals })
    }

    /// Point `{anchor}` in `ℝᵈ` (codimension `d`).
    pub fn point(anchor: Vec<f64>) -> Self {
        let d = anchor.len();
        let normals = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { anchor, normals }
    }

    /// Coincidence set `{q_i = q_j}` of two coordinates in `ℝᵈ`.
    pub fn coincidence(dim: usize, i: usize, j: usize) -> Result<Self> {
        if i == j || i >= dim || j >= dim {
            return Err(Error::InvalidInput(format!("bad coincidence pair ({i}, {j}) in dimension {dim}")));
        }
        let mut n = vec![0.0; dim];
        n[i] = std::f64::consts::FRAC_1_SQRT_2;
        n[j] = -std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![0.0; dim], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn codimension(&self) -> usize {
        self.normals.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    /// Normal coordinates `y(q) - a` of `q`.
    pub fn offset(&self, q: &[f64]) -> Vec<f64> {
        self.normals.iter().map(|n| n.iter().zip(q).zip(&self.anchor).map(|((n, x), a)| n * (x - a)).sum()).collect()
    }

    pub fn distance(&self, q: &[f64]) -> f64 {
        self.offset(q).iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    /// `(dist, e)` with `e = -∇dist`, or `None` for the direction on `Σ`.
    pub fn distance_and_direction(&self, q: &[f64]) -> (f64, Option<Vec<f64>>) {
        let y = self.offset(q);
        let dist = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dist == 0.0 {
            return (0.0, None);
        }
        let mut e = vec![0.0; self.dim()];
        for (yj, n) in y.iter().zip(&self.normals) {
            for (ei, ni) in e.iter_mut().zip(n) {
                *ei -= yj / dist * ni;
            }
        }
        (dist, Some(e))
    }
}

/// `Ω = ℝᵈ \ ∪ Σ_ℓ` together with the tube radius used by the singular-set
/// condition integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    dim: usize,
    singular: Vec<SingularSubspace>,
    delta: f64,
}

impl ConfigSpace {
    pub fn new(dim: usize, singular: Vec<SingularSubspace>, delta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("configuration space needs d >= 1".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("tube radius must be positive, got {delta}")));
        }
        if let Some(s) = singular.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
        }
        Ok(Self { dim, singular, delta })
    }

    /// `Ω = ℝᵈ`.
    pub fn euclidean(dim: usize) -> Self {
        Self { dim, singular: Vec::new(), delta: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn singular(&self) -> &[SingularSubspace] {
        &self.singular
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("tube radius must be positive, got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    /// Smallest distance to any singular subspace (`∞` when `Ω = ℝᵈ`).
    pub fn min_distance(&self, q: &[f64]) -> f64 {
        self.singular.iter().map(|s| s.distance(q)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.singular.iter().all(|s| s.distance(q) > 0.0)
    }
}

/// Distance from `q` to one singular subspace and, off the subspace, the unit
/// vector pointing towards it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDistance {
    pub index: usize,
    pub dist: f64,
    /// `None` exactly when `dist == 0`.
    pub direction: Option<Vec<f64>>,
}

/// Distances from `q` to every `Σ_ℓ`, with the direction flagged (`None`) on `Σ_ℓ`.
pub fn singular_distance(space: &ConfigSpace, q: &[f64]) -> Result<Vec<SingularDistance>> {
    if q.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: q.len() });
    }
    Ok(space
        .singular()
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let (dist, direction) = s.distance_and_direction(q);
            SingularDistance { index, dist, direction }
        })
        .collect())
}

/// Like [`singular_distance`] but requires every direction to exist.
pub fn singular_directions(space: &ConfigSpace, q: &[f64]) -> Result<Vec<(usize, f64, Vec<f64>)>> {
    singular_distance(space, q)?
        .into_iter()
        .map(|sd| match sd.direction {
            Some(e) => Ok((sd.index, sd.dist, e)),
            None => Err(Error::OnSingularSet { index: sd.index }),
        })
        .collect()
}
