//! Concave quadratic cuts valid on the integer lattice.
//!
//! For integer `a` (zero on continuous coordinates) and integer `b`, every
//! mixed-integer point satisfies `(aᵀx − b)(aᵀx − b − 1) ≥ 0`, because `aᵀx`
//! is an integer and cannot lie strictly between `b` and `b + 1`. Lifted, the
//! inequality reads `−Tr(aaᵀX) + (2b+1)aᵀx − b(b+1) ≤ 0`, and a relaxation
//! point violating it can be separated.

use std::cmp::Ordering;
use std::collections::HashSet;

use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{min_eigpair, SymMatrix};
use crate::model::{LiftedRow, QuadraticForm};
use crate::rng::seeded;

/// The lattice cut `(aᵀx − b)(aᵀx − b − 1) ≥ 0`, kept in canonical form:
/// the first nonzero entry of `a` is positive. `(a, b)` and `(−a, −b − 1)`
/// describe the same inequality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cut {
    a: Vec<i64>,
    b: i64,
}

impl Cut {
    pub fn new(a: Vec<i64>, b: i64) -> Result<Self> {
        let Some(first) = a.iter().copied().find(|&v| v != 0) else {
            return Err(Error::InvalidCut("a must be nonzero".into()));
        };
        if first < 0 {
            Ok(Cut { a: a.into_iter().map(|v| -v).collect(), b: -b - 1 })
        } else {
            Ok(Cut { a, b })
        }
    }

    /// `e_i` anchored at `b`: `(x_i − b)(x_i − b − 1) ≥ 0`.
    pub fn unit(n: usize, i: usize, b: i64) -> Self {
        let mut a = vec![0; n];
        a[i] = 1;
        Cut { a, b }
    }

    pub fn a(&self) -> &[i64] {
        &self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn check_support(&self, num_integer: usize) -> Result<()> {
        if let Some(j) = self.a.iter().skip(num_integer).position(|&v| v != 0) {
            return Err(Error::InvalidCut(format!(
                "a[{}] = {} on a continuous coordinate",
                num_integer + j,
                self.a[num_integer + j]
            )));
        }
        Ok(())
    }

    /// `(aᵀx − b)(aᵀx − b − 1)` at a point; nonnegative on the lattice.
    pub fn product(&self, x: &[f64]) -> f64 {
        let t = dot_int(&self.a, x);
        (t - self.b as f64) * (t - self.b as f64 - 1.0)
    }

    /// Exact integer evaluation of the product at an integer point.
    pub fn product_int(&self, x: &[i64]) -> i128 {
        let t: i128 = self.a.iter().zip(x).map(|(&a, &v)| a as i128 * v as i128).sum();
        let b = self.b as i128;
        (t - b) * (t - b - 1)
    }

    /// Lifted value `−aᵀX̂a + (2b+1)aᵀx̂ − b(b+1)`; positive means violated.
    pub fn violation(&self, big_x: &SymMatrix, x: &[f64]) -> f64 {
        let support: Vec<(usize, f64)> = self
            .a
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, &v)| (i, v as f64))
            .collect();
        let mut quad = 0.0;
        for &(i, ai) in &support {
            for &(j, aj) in &support {
                quad += ai * aj * big_x.get(i, j);
            }
        }
        let lin: f64 = support.iter().map(|&(i, ai)| ai * x[i]).sum();
        lifted_value(quad, lin, self.b)
    }

    /// Dense `(P, q, r) = (−aaᵀ, (2b+1)a, −b(b+1))`.
    pub fn as_form(&self, n: usize) -> QuadraticForm {
        let a: Vec<f64> = self.a.iter().map(|&v| v as f64).collect();
        let b = self.b as f64;
        QuadraticForm::new(
            SymMatrix::outer(&a).scaled(-1.0),
            a.iter().map(|v| (2.0 * b + 1.0) * v).collect(),
            -b * (b + 1.0),
        )
        .inspect(|f| debug_assert_eq!(f.dim(), n))
        .expect("cut dimensions are consistent")
    }
}

fn dot_int(a: &[i64], x: &[f64]) -> f64 {
    a.iter().zip(x).filter(|(&a, _)| a != 0).map(|(&a, &v)| a as f64 * v).sum()
}

fn lifted_value(quad: f64, lin: f64, b: i64) -> f64 {
    let b = b as f64;
    -quad + (2.0 * b + 1.0) * lin - b * (b + 1.0)
}

/// Free-function form of [`Cut::violation`] with a dimension check.
pub fn violation(cut: &Cut, big_x: &SymMatrix, x: &[f64]) -> Result<f64> {
    let n = cut.a.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if big_x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: big_x.dim() });
    }
    Ok(cut.violation(big_x, x))
}

/// `⌊aᵀx̂⌋`, the integer `b` maximizing the violation for fixed `a`.
pub fn best_b(a: &[i64], x: &[f64]) -> i64 {
    dot_int(a, x).floor() as i64
}

/// Cut with its violation at the point it was generated for.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCut {
    pub cut: Cut,
    pub violation: f64,
}

/// Violation descending, then lexicographic on `(a, b)`.
fn by_violation(x: &ScoredCut, y: &ScoredCut) -> Ordering {
    y.violation.total_cmp(&x.violation).then_with(|| x.cut.cmp(&y.cut))
}

/// Sorts, dedups and truncates.
pub fn rank_cuts(mut cuts: Vec<ScoredCut>, cap: usize) -> Vec<ScoredCut> {
    cuts.sort_by(by_violation);
    let mut seen = HashSet::new();
    cuts.retain(|c| seen.insert(c.cut.clone()));
    cuts.truncate(cap);
    cuts
}

/// Scores `a` with `b = best_b(a, x̂)` using only the support of `a`.
fn score_sparse(support: &[(usize, i64)], n: usize, big_x: &SymMatrix, x: &[f64]) -> (f64, i64) {
    let mut quad = 0.0;
    let mut lin = 0.0;
    for &(i, ai) in support {
        lin += ai as f64 * x[i];
        for &(j, aj) in support {
            quad += (ai * aj) as f64 * big_x.get(i, j);
        }
    }
    let b = lin.floor() as i64;
    debug_assert!(support.iter().all(|&(i, _)| i < n));
    (lifted_value(quad, lin, b), b)
}

fn dense_from_support(n: usize, support: &[(usize, i64)]) -> Vec<i64> {
    let mut a = vec![0; n];
    for &(i, v) in support {
        a[i] = v;
    }
    a
}

/// Exhaustive search over `a ∈ {0, ±1}^p` with at most `k` nonzeros
/// (canonical sign: first nonzero `+1`), `b = ⌊aᵀx̂⌋`. Returns the cuts with
/// violation above `eps_viol`, best first, at most `cap` of them.
pub fn enumerate_cuts(
    big_x: &SymMatrix,
    x: &[f64],
    num_integer: usize,
    k: usize,
    eps_viol: f64,
    cap: usize,
) -> Vec<ScoredCut> {
    let n = x.len();
    let p = num_integer.min(n);
    let mut found = Vec::new();
    let mut support: Vec<(usize, i64)> = Vec::with_capacity(k);
    for size in 1..=k.min(p) {
        enumerate_supports(p, size, 0, &mut support, &mut |s| {
            let (v, b) = score_sparse(s, n, big_x, x);
            if v > eps_viol {
                let cut = Cut { a: dense_from_support(n, s), b };
                found.push(ScoredCut { cut, violation: v });
            }
        });
    }
    rank_cuts(found, cap)
}

fn enumerate_supports(
    p: usize,
    size: usize,
    start: usize,
    support: &mut Vec<(usize, i64)>,
    visit: &mut impl FnMut(&[(usize, i64)]),
) {
    if support.len() == size {
        visit(support);
        return;
    }
    let remaining = size - support.len();
    for i in start..=(p - remaining) {
        let signs: &[i64] = if support.is_empty() { &[1] } else { &[1, -1] };
        for &s in signs {
            support.push((i, s));
            enumerate_supports(p, size, i + 1, support, visit);
            support.pop();
        }
    }
}

/// Result of the eigenvector heuristic.
#[derive(Clone, Debug, PartialEq)]
pub enum EigCut {
    /// `λ_min(X̂ − x̂x̂ᵀ) ≥ 1/4` on the integer block, so no lattice cut is
    /// violated at this point.
    NoCutCertified { lambda_min: f64 },
    Cuts(Vec<ScoredCut>),
}

/// Slack matrix `X̂ − x̂x̂ᵀ` restricted to the leading `num_integer`
/// coordinates.
pub fn slack_matrix(big_x: &SymMatrix, x: &[f64], num_integer: usize) -> SymMatrix {
    let p = num_integer;
    let mut m = SymMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            m.set(i, j, big_x.get(i, j) - x[i] * x[j]);
        }
    }
    m
}

/// Smallest-eigenvector heuristic. `scalings` are multiples of
/// `1 / max|v_i|` used for the rounded candidates `round(t v)`; `k_round`
/// bounds the sign-pattern candidates built from the largest `|v_i|`.
pub fn eig_cut(
    big_x: &SymMatrix,
    x: &[f64],
    num_integer: usize,
    scalings: &[f64],
    k_round: usize,
    eps_viol: f64,
) -> Result<EigCut> {
    let n = x.len();
    let p = num_integer.min(n);
    if p == 0 {
        return Ok(EigCut::NoCutCertified { lambda_min: f64::INFINITY });
    }
    let m = slack_matrix(big_x, x, p);
    let (lambda_min, v) = min_eigpair(&m)?;
    if lambda_min >= 0.25 {
        return Ok(EigCut::NoCutCertified { lambda_min });
    }
    let mut candidates: Vec<Vec<i64>> = Vec::new();
    let vmax = v.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    for &t in scalings {
        let scale = t / vmax;
        let a: Vec<i64> = v.iter().map(|e| (scale * e).round() as i64).collect();
        candidates.push(a);
    }
    candidates.extend(sign_patterns(&v, k_round));

    let mut scored = Vec::new();
    for a_head in candidates {
        let mut a = a_head;
        a.resize(n, 0);
        let b = best_b(&a, x);
        let Ok(cut) = Cut::new(a, b) else { continue };
        let viol = cut.violation(big_x, x);
        if viol > eps_viol {
            scored.push(ScoredCut { cut, violation: viol });
        }
    }
    Ok(EigCut::Cuts(rank_cuts(scored, usize::MAX)))
}

/// `a` supported on the `k` largest `|v_i|`, entries `sign(v_i)`, for
/// `k = 1..=k_round`.
fn sign_patterns(v: &DVector<f64>, k_round: usize) -> Vec<Vec<i64>> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
    (1..=k_round.min(v.len()))
        .map(|k| {
            let mut a = vec![0; v.len()];
            for &i in &order[..k] {
                a[i] = if v[i] >= 0.0 { 1 } else { -1 };
            }
            a
        })
        .collect()
}

/// `count` random `a` with exactly `nnz` entries `±1` on the integer block,
/// from a seeded ChaCha8 stream. Returns the distinct violated cuts.
pub fn random_cuts(
    big_x: &SymMatrix,
    x: &[f64],
    num_integer: usize,
    count: usize,
    nnz: usize,
    eps_viol: f64,
    seed: u64,
) -> Result<Vec<ScoredCut>> {
    let n = x.len();
    let p = num_integer.min(n);
    if nnz == 0 || nnz > p {
        return Err(Error::InvalidArgument(format!("nnz = {nnz} must be in 1..={p}")));
    }
    let mut rng = seeded(seed);
    let mut found = Vec::new();
    let mut support = Vec::with_capacity(nnz);
    for _ in 0..count {
        support.clear();
        let mut idx = index::sample(&mut rng, p, nnz).into_vec();
        idx.sort_unstable();
        for i in idx {
            let s = if rng.gen::<bool>() { 1 } else { -1 };
            support.push((i, s));
        }
        if support[0].1 < 0 {
            for e in support.iter_mut() {
                e.1 = -e.1;
            }
        }
        let (v, b) = score_sparse(&support, n, big_x, x);
        if v > eps_viol {
            found.push(ScoredCut { cut: Cut { a: dense_from_support(n, &support), b }, violation: v });
        }
    }
    Ok(rank_cuts(found, usize::MAX))
}

/// `‖x − ½·1‖² ≥ n/4` lifted: `−Tr X + 1ᵀx ≤ 0`. Valid only for pure
/// integer problems.
pub fn sphere_cut_lifted(n: usize, num_integer: usize) -> Result<LiftedRow> {
    if num_integer < n {
        return Err(Error::InvalidCut("sphere cut needs every variable integer".into()));
    }
    let form = QuadraticForm::new(SymMatrix::identity(n).scaled(-1.0), vec![1.0; n], 0.0)?;
    Ok(LiftedRow::Quadratic(form))
}
