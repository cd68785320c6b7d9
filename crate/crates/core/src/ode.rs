//! Dormand–Prince 5(4) steps with cubic Hermite dense output.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Mixed absolute / relative error control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// Outcome of one trial step.
#[derive(Debug, Clone)]
pub struct TrialStep {
    pub y: Vec<f64>,
    /// Right-hand side at the new point (first stage of the next step).
    pub f: Vec<f64>,
    /// RMS of the scaled local error estimate; the step is acceptable when `≤ 1`.
    pub error: f64,
}

fn axpy(y: &[f64], h: f64, terms: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (k, a) in terms {
        if *a != 0.0 {
            for (o, ki) in out.iter_mut().zip(k.iter()) {
                *o += h * a * ki;
            }
        }
    }
    out
}

/// One Dormand–Prince step from `(t, y)` with `f0 = f(t, y)`.
///
/// A failing stage evaluation is returned as `Err`, leaving the caller to
/// shrink the step.
pub fn dopri_step<F, E>(f: &mut F, t: f64, y: &[f64], f0: &[f64], h: f64, tol: Tolerances) -> Result<TrialStep, E>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let k1 = f0;
    let k2 = f(t + C2 * h, &axpy(y, h, &[(k1, A21)]))?;
    let k3 = f(t + C3 * h, &axpy(y, h, &[(k1, A31), (&k2, A32)]))?;
    let k4 = f(t + C4 * h, &axpy(y, h, &[(k1, A41), (&k2, A42), (&k3, A43)]))?;
    let k5 = f(t + C5 * h, &axpy(y, h, &[(k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]))?;
    let k6 = f(t + h, &axpy(y, h, &[(k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]))?;
    let y1 = axpy(y, h, &[(k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
    let k7 = f(t + h, &y1)?;
    let mut acc = 0.0;
    for i in 0..y.len() {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.abs + tol.rel * y[i].abs().max(y1[i].abs());
        acc += (e / sc).powi(2);
    }
    let error = (acc / y.len().max(1) as f64).sqrt();
    Ok(TrialStep { y: y1, f: k7, error })
}

/// Step-size multiplier after a trial with scaled error `error`.
pub fn step_factor(error: f64, rejected: bool) -> f64 {
    let raw = if error == 0.0 { 5.0 } else { 0.9 * error.powf(-0.2) };
    raw.clamp(0.2, if rejected { 1.0 } else { 5.0 })
}

/// Starting step from the size of the solution and of its derivative.
pub fn initial_step(y: &[f64], f0: &[f64], tol: Tolerances, max_step: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let sc: Vec<f64> = y.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(max_step)
}

/// Cubic Hermite interpolant on one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
}

impl DenseSegment {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.y0.clone();
        }
        let s = (t - self.t0) / h;
        let h10 = ((s - 2.0) * s + 1.0) * s * h;
        let h01 = (3.0 - 2.0 * s) * s * s;
        let h11 = (s - 1.0) * s * s * h;
        (0..self.y0.len())
            .map(|i| self.y0[i] + h01 * (self.y1[i] - self.y0[i]) + h10 * self.f0[i] + h11 * self.f1[i])
            .collect()
    }
}
