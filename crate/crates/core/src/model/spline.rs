use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// Cubic B-spline design matrix `B_l(t)`, one row per time point.
///
/// Knots are clamped on `[0, T]` with `L - 4` equidistant interior knots.
/// Time labels are mapped affinely onto `[0, T]`, so the first and last time
/// points sit on the boundary and the endpoint means equal the first and last
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    b: Vec<f64>,
    n_times: usize,
    n_basis: usize,
    knots: Vec<f64>,
    positions: Vec<f64>,
}

impl SplineBasis {
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn degree(&self) -> usize {
        DEGREE
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Evaluation points on `[0, T]`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// `x_t = [B_1(t), ..., B_L(t)]`
    pub fn row(&self, t: usize) -> &[f64] {
        &self.b[t * self.n_basis..(t + 1) * self.n_basis]
    }

    pub fn get(&self, t: usize, l: usize) -> f64 {
        self.b[t * self.n_basis + l]
    }
}

/// All `L` cubic B-spline values at `x` for a clamped knot vector.
pub fn eval_basis(knots: &[f64], n_basis: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_basis];
    let lo = knots[DEGREE];
    let hi = knots[n_basis];
    if x >= hi {
        out[n_basis - 1] = 1.0;
        return out;
    }
    let x = x.max(lo);
    // knot span: knots[span] <= x < knots[span + 1]
    let mut span = DEGREE;
    while span + 1 < n_basis && knots[span + 1] <= x {
        span += 1;
    }
    // de Boor / Cox recursion for the DEGREE + 1 nonzero functions
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    for (j, v) in n.iter().enumerate() {
        out[span - DEGREE + j] = *v;
    }
    out
}

/// Cubic B-spline basis with `n_basis` functions evaluated at `times`.
pub fn spline_basis(times: &[f64], n_basis: usize) -> Result<SplineBasis> {
    let t = times.len();
    if n_basis < DEGREE + 1 {
        return Err(Error::IllPosedBasis(format!("need at least 4 cubic B-splines, got {n_basis}")));
    }
    if n_basis > t {
        return Err(Error::IllPosedBasis(format!("{n_basis} basis functions exceed {t} time points")));
    }
    if times.iter().any(|v| !v.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::IllPosedBasis("time labels must be finite and strictly increasing".into()));
    }
    let span = t as f64;
    let interior = n_basis - DEGREE - 1;
    let mut knots = vec![0.0; DEGREE + 1];
    for k in 1..=interior {
        knots.push(span * k as f64 / (interior + 1) as f64);
    }
    knots.extend(core::iter::repeat_n(span, DEGREE + 1));

    let (t0, t1) = (times[0], times[t - 1]);
    let positions: Vec<f64> = times.iter().map(|&v| (v - t0) / (t1 - t0) * span).collect();
    let mut b = Vec::with_capacity(t * n_basis);
    for &x in &positions {
        b.extend(eval_basis(&knots, n_basis, x));
    }
    Ok(SplineBasis { b, n_times: t, n_basis, knots, positions })
}
