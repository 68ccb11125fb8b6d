//! Exhaustive ground truth for small instances.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::QcqpProblem;

/// Largest number of points [`brute_force`] will visit.
pub const MAX_BOX_POINTS: f64 = 1e7;
pub const MAX_MAXCUT_VERTICES: usize = 22;

/// Integer box `lo ≤ x ≤ hi`, bounds inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl IntBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        Ok(IntBox { lo, hi })
    }

    /// `[−r, r]ⁿ`.
    pub fn symmetric(n: usize, r: i64) -> Self {
        IntBox { lo: vec![-r; n], hi: vec![r; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (h - l + 1).max(0) as f64).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    /// `+∞` when no point of the box is feasible.
    pub f_star: f64,
    pub argmins: Vec<Vec<i64>>,
    pub points: u64,
}

/// Evaluates every integer point of `bounds`, keeping the feasible
/// minimizers. Points within `1e−9·(1 + |f*|)` of the minimum are all
/// reported.
pub fn brute_force(problem: &QcqpProblem, bounds: &IntBox) -> Result<OracleResult> {
    let n = problem.n();
    if !problem.is_pure_integer() {
        return Err(Error::InvalidProblem("enumeration needs every variable integer".into()));
    }
    if bounds.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bounds.dim() });
    }
    let problem = &problem.normalize_equalities();
    let volume = bounds.volume();
    if volume > MAX_BOX_POINTS {
        return Err(Error::BoxTooLarge { points: volume, limit: MAX_BOX_POINTS });
    }
    let mut values: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut best = f64::INFINITY;
    let mut points = 0u64;
    if volume > 0.0 {
        let mut x = bounds.lo.clone();
        let mut xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        loop {
            points += 1;
            if problem.constraints().iter().all(|c| c.form.eval_unchecked(&xf) <= constraint_tol(c.form.r())) {
                let f = problem.objective().eval_unchecked(&xf);
                if f <= best + 1e-9 * (1.0 + best.abs().min(f.abs())) {
                    best = best.min(f);
                    values.push((f, x.clone()));
                }
            }
            // odometer step
            let mut k = 0;
            while k < n {
                if x[k] < bounds.hi[k] {
                    x[k] += 1;
                    xf[k] += 1.0;
                    break;
                }
                x[k] = bounds.lo[k];
                xf[k] = x[k] as f64;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    let cutoff = best + 1e-9 * (1.0 + best.abs());
    let mut argmins: Vec<Vec<i64>> = values.into_iter().filter(|(f, _)| *f <= cutoff).map(|(_, x)| x).collect();
    argmins.sort();
    Ok(OracleResult { f_star: best, argmins, points })
}

/// Slack for roundoff in constraint evaluation at integer points.
fn constraint_tol(r: f64) -> f64 {
    1e-9 * (1.0 + r.abs())
}

/// Maximum cut by enumerating the `2ⁿ⁻¹` sign patterns with the first vertex
/// fixed, in Gray-code order. Returns the value and a maximizing 0-1 vector.
pub fn brute_force_maxcut(w: &SymMatrix) -> Result<(f64, Vec<i64>)> {
    let n = w.dim();
    if n > MAX_MAXCUT_VERTICES {
        return Err(Error::InvalidArgument(format!("max-cut oracle limited to {MAX_MAXCUT_VERTICES} vertices")));
    }
    if n <= 1 {
        return Ok((0.0, vec![0; n]));
    }
    // all vertices on one side: cut weight 0
    let mut side = vec![1i64; n];
    let mut value = 0.0;
    let mut best = (0.0, side.clone());
    let free = n - 1;
    for step in 1u64..(1u64 << free) {
        let bit = step.trailing_zeros() as usize;
        let i = bit + 1;
        // flipping s_i changes ½Σ W_ij(1 − s_i s_j) by Σ_j W_ij s_i s_j
        let delta: f64 = (0..n).filter(|&j| j != i).map(|j| w.get(i, j) * (side[i] * side[j]) as f64).sum();
        side[i] = -side[i];
        value += delta;
        if value > best.0 {
            best = (value, side.clone());
        }
    }
    let z = best.1.iter().map(|&s| i64::from(s < 0)).collect();
    Ok((best.0, z))
}

/// A box containing every minimizer of `‖A(x − x_cts)‖²` over the integers:
/// with `U` the value at `round(x_cts)`, any `x` farther than `√U/σ_min(A)`
/// from `x_cts` in some coordinate is worse than `round(x_cts)`. The radius
/// gets a margin of 1.
pub fn ils_box(a: &DMatrix<f64>, x_cts: &[f64]) -> Result<IntBox> {
    let n = x_cts.len();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if a.nrows() < n || n == 0 {
        return Err(Error::RankDeficient);
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return Err(Error::RankDeficient);
    }
    let d = DVector::from_iterator(n, x_cts.iter().map(|v| v.round() - v));
    let upper = (a * d).norm_squared();
    let radius = upper.sqrt() / smin + 1.0;
    let lo = x_cts.iter().map(|c| (c - radius - 1e-9).ceil() as i64).collect();
    let hi = x_cts.iter().map(|c| (c + radius + 1e-9).floor() as i64).collect();
    Ok(IntBox { lo, hi })
}
