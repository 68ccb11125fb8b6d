//! Randomized rounding of relaxation solutions to feasible integer points.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, SymMatrix};
use crate::model::QcqpProblem;
use crate::rng::{seeded, Gaussian};
use crate::sdp::SdpSolution;

/// Eigenvalues below this are treated as zero when factoring covariances.
const PSD_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Rounded {
    pub x: Vec<i64>,
    pub value: f64,
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one rounding sample is required".into()));
    }
    Ok(())
}

fn to_f64(x: &[i64]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// Greedy descent over unit moves `x ± e_i`, taking the best improving move
/// each step. `g = Px` is kept up to date so a move costs `O(n)`.
fn polish(problem: &QcqpProblem, mut x: Vec<i64>) -> Rounded {
    let obj = problem.objective();
    let p = obj.p();
    let n = x.len();
    let xf = to_f64(&x);
    let mut g = p.as_matrix() * DVector::from_column_slice(&xf);
    let mut value = obj.eval_unchecked(&xf);
    let constrained = !problem.constraints().is_empty();
    loop {
        let mut best: Option<(f64, usize, i64)> = None;
        for i in 0..n.min(problem.num_integer()) {
            for t in [-1i64, 1] {
                let tf = t as f64;
                let delta = tf * tf * p.get(i, i) + tf * (2.0 * g[i] + obj.q()[i]);
                if delta < -1e-12 * (1.0 + value.abs()) && best.is_none_or(|b| delta < b.0) {
                    if constrained {
                        let mut y = to_f64(&x);
                        y[i] += tf;
                        if !problem.constraints_hold(&y, 1e-9).unwrap_or(false) {
                            continue;
                        }
                    }
                    best = Some((delta, i, t));
                }
            }
        }
        let Some((delta, i, t)) = best else { break };
        x[i] += t;
        value += delta;
        let col = p.as_matrix().column(i);
        g.axpy(t as f64, &col, 1.0);
    }
    // report the exact value rather than the accumulated one
    let value = obj.eval_unchecked(&to_f64(&x));
    Rounded { x, value }
}

fn better(a: &Rounded, b: &Rounded) -> bool {
    a.value < b.value || (a.value == b.value && a.x < b.x)
}

/// Gaussian rounding for integer least squares: samples `N(x̂, M₊)` with
/// `M₊` the PSD projection of `X̂ − x̂x̂ᵀ`, rounds to the lattice, polishes
/// each distinct point by unit moves and returns the best. `round(x̂)` is
/// always among the candidates. Continuous coordinates are not supported.
pub fn ils_round(solution: &SdpSolution, problem: &QcqpProblem, samples: usize, seed: u64) -> Result<Rounded> {
    check_samples(samples)?;
    let n = problem.n();
    if !problem.is_pure_integer() {
        return Err(Error::InvalidProblem("rounding needs every variable integer".into()));
    }
    if solution.x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: solution.x.len() });
    }
    let slack = solution.slack_matrix();
    let factor = if slack.is_finite() { psd_factor(&slack, PSD_TOL)? } else { DMatrix::zeros(n, 0) };
    let mean = DVector::from_column_slice(&solution.x);

    let mut rng = seeded(seed);
    let mut gauss = Gaussian::new();
    let mut seen = HashSet::new();
    let mut candidates = Vec::new();
    let mut push = |x: Vec<i64>| {
        if seen.insert(x.clone()) {
            candidates.push(x);
        }
    };
    push(solution.x.iter().map(|v| v.round() as i64).collect());
    for _ in 0..samples {
        let g = DVector::from_fn(factor.ncols(), |_, _| gauss.sample(&mut rng));
        let s = &mean + &factor * g;
        push(s.iter().map(|v| v.round() as i64).collect());
    }

    let polished: Vec<Rounded> = candidates
        .into_par_iter()
        .filter(|x| problem.constraints_hold(&to_f64(x), 1e-9).unwrap_or(false))
        .map(|x| polish(problem, x))
        .collect();
    polished
        .into_iter()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or_else(|| Error::InvalidProblem("no rounded sample is feasible".into()))
}

/// Weight of the cut between `{i : z_i = 1}` and its complement.
pub fn cut_weight(w: &SymMatrix, z: &[i64]) -> f64 {
    let n = w.dim();
    let mut v = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if z[i] != z[j] {
                v += w.get(i, j);
            }
        }
    }
    v
}

/// Second-moment matrix of `s = 2z − 1` under the lifted point:
/// `4X̂ − 2x̂1ᵀ − 2·1x̂ᵀ + 11ᵀ`.
pub fn pm1_moments(solution: &SdpSolution) -> SymMatrix {
    let n = solution.x.len();
    let mut y = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            y.set(i, j, 4.0 * solution.big_x.get(i, j) - 2.0 * solution.x[i] - 2.0 * solution.x[j] + 1.0);
        }
    }
    y
}

fn flip_polish(w: &SymMatrix, z: &mut [i64]) {
    let n = z.len();
    loop {
        let mut best = (1e-12, None);
        for i in 0..n {
            let gain: f64 = (0..n).filter(|&j| j != i).map(|j| if z[i] == z[j] { w.get(i, j) } else { -w.get(i, j) }).sum();
            if gain > best.0 {
                best = (gain, Some(i));
            }
        }
        let Some(i) = best.1 else { break };
        z[i] = 1 - z[i];
    }
}

/// Hyperplane rounding on a factor of the ±1 moment matrix, best of
/// `samples` hyperplanes, each optionally improved by single-vertex flips.
/// Returns the 0-1 side vector and its cut weight.
pub fn maxcut_round(solution: &SdpSolution, w: &SymMatrix, samples: usize, seed: u64, polish: bool) -> Result<Rounded> {
    check_samples(samples)?;
    let n = w.dim();
    if solution.x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: solution.x.len() });
    }
    let v = psd_factor(&pm1_moments(solution), PSD_TOL)?;
    let mut rng = seeded(seed);
    let mut gauss = Gaussian::new();
    let mut best: Option<Rounded> = None;
    for _ in 0..samples {
        let g = DVector::from_fn(v.ncols(), |_, _| gauss.sample(&mut rng));
        let proj = &v * g;
        let mut z: Vec<i64> = proj.iter().map(|&p| i64::from(p >= 0.0)).collect();
        if polish {
            flip_polish(w, &mut z);
        }
        let cand = Rounded { value: cut_weight(w, &z), x: z };
        if best.as_ref().is_none_or(|b| cand.value > b.value) {
            best = Some(cand);
        }
    }
    Ok(best.expect("samples ≥ 1"))
}

/// Rounds an upper bound on an integer-valued maximum down: `⌊v + 1e−6⌋`.
pub fn floor_bound(v: f64) -> f64 {
    (v + 1e-6).floor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::Cut;
    use crate::instances;
    use crate::model::{lift, QuadraticForm};
    use crate::oracle;
    use crate::sdp::{solve, SdpStatus, SolverSettings};
    use approx::assert_abs_diff_eq;

    fn point(big_x: SymMatrix, x: Vec<f64>) -> SdpSolution {
        SdpSolution {
            status: SdpStatus::Optimal,
            big_x,
            x,
            f_sdp: 0.0,
            duals: vec![],
            tags: vec![],
            dual_objective: 0.0,
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
        }
    }

    #[test]
    fn degenerate_gaussian_returns_the_point() {
        let inst = instances::gen_ils_instance(3, 0).unwrap();
        let problem = inst.problem();
        let x = vec![1.0, -2.0, 0.0];
        let sol = point(SymMatrix::outer(&x), x.clone());
        let r = ils_round(&sol, &problem, 5, 1).unwrap();
        // polishing may only improve on round(x̂)
        assert!(r.value <= problem.objective().evaluate(&x).unwrap() + 1e-12);
        let q = QcqpProblem::new(1, QuadraticForm::from_row_major(1, &[1.0], vec![-4.0], 4.0).unwrap()).unwrap();
        let s = point(SymMatrix::outer(&[2.0]), vec![2.0]);
        assert_eq!(ils_round(&s, &q, 3, 0).unwrap(), Rounded { x: vec![2], value: 0.0 });
    }

    #[test]
    fn one_dimensional_ils() {
        let q = QcqpProblem::new(1, QuadraticForm::from_row_major(1, &[1.0], vec![-0.8], 0.16).unwrap()).unwrap();
        let sdp = lift(&q, &[Cut::unit(1, 0, 0)]).unwrap();
        let sol = solve(&sdp, &SolverSettings::default()).unwrap();
        let r = ils_round(&sol, &q, 50, 3).unwrap();
        assert_eq!(r.x, vec![0]);
        assert_abs_diff_eq!(r.value, 0.16, epsilon = 1e-12);
    }

    #[test]
    fn rounding_is_deterministic_and_above_optimum() {
        let inst = instances::gen_ils_instance(5, 8).unwrap();
        let problem = inst.problem();
        let sol = solve(&lift(&problem, &[]).unwrap(), &SolverSettings::default()).unwrap();
        let a = ils_round(&sol, &problem, 200, 4).unwrap();
        let b = ils_round(&sol, &problem, 200, 4).unwrap();
        assert_eq!(a, b);
        let ibox = oracle::ils_box(&inst.a, &inst.x_cts).unwrap();
        let exact = oracle::brute_force(&problem, &ibox).unwrap();
        assert!(a.value >= exact.f_star - 1e-9);
    }

    #[test]
    fn rejects_zero_samples() {
        let sol = point(SymMatrix::zeros(1), vec![0.0]);
        let q = QcqpProblem::new(1, QuadraticForm::constant(1, 0.0)).unwrap();
        assert!(ils_round(&sol, &q, 0, 0).is_err());
        assert!(maxcut_round(&sol, &SymMatrix::zeros(1), 0, 0, false).is_err());
    }

    #[test]
    fn independent_vertices_give_valid_cuts() {
        // x̂ = ½, X̂ = ¼(I + 11ᵀ) gives Y = I
        let n = 4;
        let mut big_x = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                big_x.set(i, j, if i == j { 0.5 } else { 0.25 });
            }
        }
        let sol = point(big_x, vec![0.5; n]);
        let y = pm1_moments(&sol);
        assert_eq!(y, SymMatrix::identity(n));
        let w = instances::random_graph(n, 1.0, 5);
        let (opt, _) = oracle::brute_force_maxcut(&w).unwrap();
        let r = maxcut_round(&sol, &w, 20, 2, false).unwrap();
        assert!(r.value <= opt);
        assert_abs_diff_eq!(r.value, cut_weight(&w, &r.x));
    }

    #[test]
    fn triangle_rounds_to_two() {
        let w = instances::triangle();
        let problem = instances::maxcut_to_qcqp(&w).unwrap();
        let sol = solve(&lift(&problem, &[]).unwrap(), &SolverSettings::default()).unwrap();
        let y = pm1_moments(&sol);
        for i in 0..3 {
            assert_abs_diff_eq!(y.get(i, i), 1.0, epsilon = 1e-6);
        }
        let r = maxcut_round(&sol, &w, 30, 9, false).unwrap();
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn maxcut_rounding_bracketed_by_oracle() {
        for seed in 0..4 {
            let w = instances::random_graph(10, 0.5, seed);
            let problem = instances::maxcut_to_qcqp(&w).unwrap();
            let sol = solve(&lift(&problem, &[]).unwrap(), &SolverSettings::default()).unwrap();
            let (opt, _) = oracle::brute_force_maxcut(&w).unwrap();
            let r = maxcut_round(&sol, &w, 100, seed, true).unwrap();
            assert!(r.value <= opt + 1e-9);
            assert!(floor_bound(-sol.f_sdp) >= opt);
        }
    }

    #[test]
    fn floor_bound_tolerates_roundoff() {
        assert_eq!(floor_bound(4.9999999), 5.0);
        assert_eq!(floor_bound(5.3), 5.0);
        assert_eq!(floor_bound(-0.0000001), 0.0);
    }
}
