//! Lagrangian dual certificates.
//!
//! For multipliers `λ ≥ 0` and a scalar `α`, write
//! `Y = P₀ + Σλ_iP_i`, `y = ½(q₀ + Σλ_iq_i)`. If `[[Y, y], [yᵀ, α]] ⪰ 0` then
//! `f₀(x) + Σλ_if_i(x) ≥ r₀ + Σλ_ir_i − α` for every `x`, so that value is a
//! lower bound on the problem whenever every lifted constraint is valid at
//! the feasible integer points. Checking it needs one Cholesky factorization
//! and no trust in the solver.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{chol_psd, sym_eig, SymMatrix};
use crate::model::LiftedSdp;
use crate::sdp::SdpSolution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualCertificate {
    /// One multiplier per lifted constraint, in lift order.
    pub lambda: Vec<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

/// `(Y, y, r₀ + Σλ_ir_i)`.
fn aggregate(lift: &LiftedSdp, lambda: &[f64]) -> (SymMatrix, Vec<f64>, f64) {
    let n = lift.n();
    let obj = lift.objective();
    let mut big_y = obj.p().clone();
    let mut q = obj.q().to_vec();
    let mut r = obj.r();
    for (c, &l) in lift.constraints().iter().zip(lambda) {
        if l == 0.0 {
            continue;
        }
        let f = c.to_form(n);
        big_y.add_scaled(l, f.p());
        for (qi, fi) in q.iter_mut().zip(f.q()) {
            *qi += l * fi;
        }
        r += l * f.r();
    }
    (big_y, q.iter().map(|v| 0.5 * v).collect(), r)
}

fn bordered(big_y: &SymMatrix, y: &[f64], alpha: f64) -> SymMatrix {
    let n = y.len();
    let mut b = SymMatrix::zeros(n + 1);
    for (i, &yi) in y.iter().enumerate() {
        for j in i..n {
            b.set(i, j, big_y.get(i, j));
        }
        b.set(i, n, yi);
    }
    b.set(n, n, alpha);
    b
}

fn check_len(lift: &LiftedSdp, cert: &DualCertificate) -> Result<()> {
    if cert.lambda.len() != lift.len() {
        return Err(Error::DimensionMismatch { expected: lift.len(), got: cert.lambda.len() });
    }
    Ok(())
}

/// `r₀ + Σλ_ir_i − α`.
pub fn dual_objective(lift: &LiftedSdp, cert: &DualCertificate) -> Result<f64> {
    check_len(lift, cert)?;
    let n = lift.n();
    let mut v = lift.objective().r() - cert.alpha;
    for (c, &l) in lift.constraints().iter().zip(&cert.lambda) {
        if l != 0.0 {
            v += l * c.to_form(n).r();
        }
    }
    Ok(v)
}

pub fn verify(lift: &LiftedSdp, cert: &DualCertificate, tol: f64) -> Verdict {
    if cert.lambda.len() != lift.len() {
        return Verdict::Invalid(format!("expected {} multipliers, got {}", lift.len(), cert.lambda.len()));
    }
    if !cert.alpha.is_finite() || cert.lambda.iter().any(|l| !l.is_finite()) {
        return Verdict::Invalid("non-finite entries".into());
    }
    if let Some((k, l)) = cert.lambda.iter().enumerate().find(|(_, &l)| l < -tol) {
        return Verdict::Invalid(format!("multiplier {k} is negative ({l})"));
    }
    let (big_y, y, _) = aggregate(lift, &cert.lambda);
    if chol_psd(&bordered(&big_y, &y, cert.alpha), tol).is_psd() {
        Verdict::Valid
    } else {
        Verdict::Invalid("bordered matrix is not PSD".into())
    }
}

/// Smallest `α` (up to the regularization `tau`) making the bordered matrix
/// PSD, or `None` when `Y` has an eigenvalue below `−tau`.
fn min_alpha(big_y: &SymMatrix, y: &[f64], tau: f64) -> Result<Option<f64>> {
    let eig = sym_eig(big_y)?;
    if !eig.values.is_empty() && eig.values[0] < -tau {
        return Ok(None);
    }
    let yv = nalgebra::DVector::from_column_slice(y);
    let proj = eig.vectors.transpose() * yv;
    let alpha = proj.iter().zip(eig.values.iter()).map(|(p, &l)| p * p / l.max(tau)).sum();
    Ok(Some(alpha))
}

fn lambda_min(lift: &LiftedSdp, lambda: &[f64]) -> Result<f64> {
    let (big_y, _, _) = aggregate(lift, lambda);
    if big_y.dim() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(sym_eig(&big_y)?.values[0])
}

/// Bound and certificate for the multipliers `t·λ`, if `Y(tλ)` is PSD
/// within `tau`.
fn candidate(lift: &LiftedSdp, lambda: &[f64], t: f64, tau: f64) -> Result<Option<(f64, DualCertificate)>> {
    let scaled: Vec<f64> = lambda.iter().map(|l| l * t).collect();
    let (big_y, y, r) = aggregate(lift, &scaled);
    Ok(min_alpha(&big_y, &y, tau)?.map(|alpha| (r - alpha, DualCertificate { lambda: scaled, alpha })))
}

const MAX_SCALE: f64 = 4.0;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximizes `f` over `[lo, hi]` by golden-section search, assuming
/// unimodality.
fn golden_max(mut lo: f64, mut hi: f64, iters: usize, f: &mut impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    for _ in 0..iters {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = f(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = f(a)?;
        }
    }
    Ok(if fa >= fb { a } else { b })
}

/// Builds a certificate from the solver multipliers.
///
/// `α` is the smallest value that makes the bordered matrix PSD given `λ`.
/// When `Y = P₀ + Σλ_iP_i` itself is not PSD (typical for inaccurate
/// multipliers) the multipliers are rescaled to `tλ`: `t ↦ λ_min(Y(tλ))` is
/// concave, so the PSD range of `t` is an interval, and the bound is
/// maximized over it.
pub fn extract_certificate(solution: &SdpSolution, lift: &LiftedSdp, tol: f64) -> Result<DualCertificate> {
    if !solution.status.has_solution() {
        return Err(Error::CannotCertify(format!("solver status {}", solution.status)));
    }
    if solution.duals.len() != lift.len() {
        return Err(Error::DimensionMismatch { expected: lift.len(), got: solution.duals.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let tau = tol / 4.0;
    let lambda: Vec<f64> = solution.duals.iter().map(|&l| if l.is_finite() { l.max(0.0) } else { 0.0 }).collect();

    if let Some((_, cert)) = candidate(lift, &lambda, 1.0, tau)? {
        if verify(lift, &cert, tol).is_valid() {
            return Ok(cert);
        }
    }

    // locate the t maximizing λ_min(Y(tλ))
    let t_star = golden_max(0.0, MAX_SCALE, 60, &mut |t| {
        lambda_min(lift, &lambda.iter().map(|l| l * t).collect::<Vec<_>>())
    })?;
    let feasible = |t: f64| -> Result<bool> {
        Ok(lambda_min(lift, &lambda.iter().map(|l| l * t).collect::<Vec<_>>())? >= -tau)
    };
    if !feasible(t_star)? {
        return Err(Error::CannotCertify("no scaling of the multipliers makes the Hessian PSD".into()));
    }
    // bracket the feasible interval around t_star
    let edge = |inside: f64, outside: f64| -> Result<f64> {
        if feasible(outside)? {
            return Ok(outside);
        }
        let (mut a, mut b) = (inside, outside);
        for _ in 0..50 {
            let m = 0.5 * (a + b);
            if feasible(m)? {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(a)
    };
    let lo = edge(t_star, 0.0)?;
    let hi = edge(t_star, MAX_SCALE)?;

    let mut bound_at = |t: f64| -> Result<f64> {
        Ok(candidate(lift, &lambda, t, tau)?.map_or(f64::NEG_INFINITY, |(b, _)| b))
    };
    // coarse scan, then a local refinement around the best sample
    let samples = 24;
    let mut best_t = t_star;
    let mut best = bound_at(t_star)?;
    for k in 0..=samples {
        let t = lo + (hi - lo) * k as f64 / samples as f64;
        let b = bound_at(t)?;
        if b > best {
            best = b;
            best_t = t;
        }
    }
    let step = (hi - lo) / samples as f64;
    let refined = golden_max((best_t - step).max(lo), (best_t + step).min(hi), 40, &mut bound_at)?;
    let mut pick = best_t;
    if bound_at(refined)? > best {
        pick = refined;
    }
    for t in [pick, t_star] {
        if let Some((_, cert)) = candidate(lift, &lambda, t, tau)? {
            if verify(lift, &cert, tol).is_valid() {
                return Ok(cert);
            }
        }
    }
    Err(Error::CannotCertify("repaired multipliers failed verification".into()))
}

/// Certificate and its bound in one call.
pub fn certified_bound(solution: &SdpSolution, lift: &LiftedSdp, tol: f64) -> Result<(DualCertificate, f64)> {
    let cert = extract_certificate(solution, lift, tol)?;
    let bound = dual_objective(lift, &cert)?;
    Ok((cert, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::Cut;
    use crate::instances;
    use crate::model::{lift, QcqpProblem, QuadraticForm, Sense};
    use crate::sdp::{solve, SolverSettings};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn concave() -> QcqpProblem {
        let obj = QuadraticForm::new(SymMatrix::identity(2).scaled(-1.0), vec![0.0; 2], 0.0).unwrap();
        let ball = QuadraticForm::new(SymMatrix::identity(2), vec![0.0; 2], -1.2).unwrap();
        QcqpProblem::new(2, obj).unwrap().with(ball, Sense::Leq).unwrap()
    }

    #[test]
    fn objective_examples() {
        let sdp = lift(&concave(), &[]).unwrap();
        let zero = DualCertificate { lambda: vec![0.0], alpha: 0.0 };
        assert_eq!(dual_objective(&sdp, &zero).unwrap(), 0.0);
        let one = DualCertificate { lambda: vec![1.0], alpha: 0.0 };
        assert_abs_diff_eq!(dual_objective(&sdp, &one).unwrap(), -1.2, epsilon = 1e-15);
        assert!(verify(&sdp, &one, 1e-9).is_valid());
        assert!(!verify(&sdp, &zero, 1e-6).is_valid());
        assert!(dual_objective(&sdp, &DualCertificate { lambda: vec![], alpha: 0.0 }).is_err());

        let ils = lift(&instances::gen_ils(5, 2).unwrap(), &[]).unwrap();
        let cert = DualCertificate { lambda: vec![], alpha: 0.0 };
        // r₀ = x_ctsᵀAᵀAx_cts, so a zero certificate bounds by r₀ − α with α = yᵀY⁻¹y = r₀
        let sol = solve(&ils, &SolverSettings::default()).unwrap();
        let extracted = extract_certificate(&sol, &ils, 1e-6).unwrap();
        assert_abs_diff_eq!(dual_objective(&ils, &extracted).unwrap(), 0.0, epsilon = 1e-5);
        assert!(verify(&ils, &DualCertificate { alpha: ils.objective().r(), ..cert }, 1e-6).is_valid());
    }

    #[test]
    fn trivial_psd_objective() {
        let obj = QuadraticForm::new(SymMatrix::from_diagonal(&[1.0, 2.0]), vec![0.0; 2], 3.0).unwrap();
        let sdp = lift(&QcqpProblem::new(2, obj).unwrap(), &[]).unwrap();
        assert!(verify(&sdp, &DualCertificate { lambda: vec![], alpha: 0.0 }, 1e-12).is_valid());
    }

    #[test]
    fn negative_multiplier_rejected() {
        let sdp = lift(&concave(), &[]).unwrap();
        let v = verify(&sdp, &DualCertificate { lambda: vec![-0.5], alpha: 0.0 }, 1e-6);
        assert!(matches!(v, Verdict::Invalid(ref m) if m.contains("negative")));
    }

    #[test]
    fn concave_example_certificate() {
        let sdp = lift(&concave(), &[]).unwrap();
        let sol = solve(&sdp, &SolverSettings::default()).unwrap();
        let (cert, bound) = certified_bound(&sol, &sdp, 1e-6).unwrap();
        assert!(verify(&sdp, &cert, 1e-6).is_valid());
        assert_abs_diff_eq!(bound, -1.2, epsilon = 1e-6);
    }

    #[test]
    fn convex_qp_bound_is_tight() {
        // min (x−1)² + (y+2)² s.t. x + y ≥ 1
        let obj = QuadraticForm::new(SymMatrix::identity(2), vec![-2.0, 4.0], 5.0).unwrap();
        let lin = QuadraticForm::linear(vec![-1.0, -1.0], 1.0);
        let p = QcqpProblem::new(0, obj).unwrap().with(lin, Sense::Leq).unwrap();
        let sdp = lift(&p, &[]).unwrap();
        let sol = solve(&sdp, &SolverSettings::default()).unwrap();
        let (_, bound) = certified_bound(&sol, &sdp, 1e-6).unwrap();
        // projection of (1, −2) onto x + y ≥ 1 is (2, −1), distance² = 2
        assert_abs_diff_eq!(sol.f_sdp, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(bound, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn optimal_solves_certify_close_to_primal() {
        let s = SolverSettings::default();
        for seed in 0..5 {
            let problem = instances::gen_ils(6, seed).unwrap();
            let cuts: Vec<Cut> = (0..6).map(|i| Cut::unit(6, i, 0)).collect();
            let sdp = lift(&problem, &cuts).unwrap();
            let sol = solve(&sdp, &s).unwrap();
            let (cert, bound) = certified_bound(&sol, &sdp, 1e-6).unwrap();
            assert!(verify(&sdp, &cert, 1e-6).is_valid());
            assert!(bound >= sol.f_sdp - 10.0 * s.rel_gap_tol * (1.0 + sol.f_sdp.abs()) - 1e-6, "{bound} {}", sol.f_sdp);
            assert!(bound <= sol.f_sdp + 1e-5);
        }
    }

    #[test]
    fn max_iters_iterates_still_certify() {
        let s = SolverSettings { max_iters: 6, ..SolverSettings::default() };
        for seed in 0..5 {
            let problem = instances::gen_ils(5, seed).unwrap();
            let cuts: Vec<Cut> = (0..5).map(|i| Cut::unit(5, i, 0)).collect();
            let sdp = lift(&problem, &cuts).unwrap();
            let sol = solve(&sdp, &s).unwrap();
            let full = solve(&sdp, &SolverSettings::default()).unwrap();
            let (cert, bound) = certified_bound(&sol, &sdp, 1e-6).unwrap();
            assert!(verify(&sdp, &cert, 1e-6).is_valid());
            assert!(bound <= full.f_sdp + 1e-6);
        }
    }

    #[test]
    fn hopeless_multipliers_cannot_certify() {
        let p = QcqpProblem::new(0, QuadraticForm::from_row_major(1, &[-1.0], vec![0.0], 0.0).unwrap()).unwrap();
        let sdp = lift(&p, &[]).unwrap();
        let fake = SdpSolution {
            status: crate::sdp::SdpStatus::MaxIters,
            big_x: SymMatrix::zeros(1),
            x: vec![0.0],
            f_sdp: 0.0,
            duals: vec![],
            tags: vec![],
            dual_objective: 0.0,
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
        };
        assert!(matches!(extract_certificate(&fake, &sdp, 1e-6), Err(Error::CannotCertify(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        /// Certified bounds never exceed the best integer point in a box.
        #[test]
        fn certified_bound_below_integer_points(seed in 0u64..10_000) {
            let inst = instances::gen_ils_instance(3, seed).unwrap();
            let problem = inst.problem();
            let cuts = vec![Cut::unit(3, 0, 0), Cut::new(vec![1, 1, 0], 0).unwrap()];
            let sdp = lift(&problem, &cuts).unwrap();
            let sol = solve(&sdp, &SolverSettings::default()).unwrap();
            let (_, bound) = certified_bound(&sol, &sdp, 1e-6).unwrap();
            let mut best = f64::INFINITY;
            for a in -3..=3 {
                for b in -3..=3 {
                    for c in -3..=3 {
                        best = best.min(problem.objective().evaluate(&[a as f64, b as f64, c as f64]).unwrap());
                    }
                }
            }
            prop_assert!(bound <= best + 1e-9);
        }
    }
}
