//! Mixed-integer QCQP data and its lifting to the SDP space.
//!
//! A problem minimizes `xᵀP₀x + q₀ᵀx + r₀` subject to quadratic constraints,
//! with the first `num_integer` coordinates restricted to the integers.
//! Lifting replaces `xxᵀ` by a matrix variable `X`; every quadratic form
//! becomes the affine functional `Tr(P X) + qᵀx + r` and integrality is
//! dropped.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cuts::Cut;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// `xᵀ P x + qᵀ x + r` with `P` stored symmetrized.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    p: SymMatrix,
    q: Vec<f64>,
    r: f64,
}

impl QuadraticForm {
    pub fn new(p: SymMatrix, q: Vec<f64>, r: f64) -> Result<Self> {
        if p.dim() != q.len() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: q.len() });
        }
        Ok(QuadraticForm { p, q, r })
    }

    /// Row-major `P` (symmetrized on construction).
    pub fn from_row_major(n: usize, p: &[f64], q: Vec<f64>, r: f64) -> Result<Self> {
        Self::new(SymMatrix::from_row_major(n, p)?, q, r)
    }

    pub fn constant(n: usize, r: f64) -> Self {
        QuadraticForm { p: SymMatrix::zeros(n), q: vec![0.0; n], r }
    }

    pub fn linear(q: Vec<f64>, r: f64) -> Self {
        QuadraticForm { p: SymMatrix::zeros(q.len()), q, r }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn p(&self) -> &SymMatrix {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        self.p.quad(x) + lin + self.r
    }

    /// Lifted value `Tr(P X) + qᵀx + r`.
    pub fn evaluate_lifted(&self, big_x: &SymMatrix, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if big_x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: big_x.dim() });
        }
        let lin: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        Ok(self.p.inner(big_x) + lin + self.r)
    }

    pub fn negated(&self) -> Self {
        QuadraticForm {
            p: -self.p.clone(),
            q: self.q.iter().map(|v| -v).collect(),
            r: -self.r,
        }
    }

    pub fn with_offset(&self, delta: f64) -> Self {
        QuadraticForm { p: self.p.clone(), q: self.q.clone(), r: self.r + delta }
    }

    /// `sqrt(‖P‖_F² + ‖q‖² + r²)`.
    pub fn norm(&self) -> f64 {
        let p = self.p.frobenius_norm();
        let q: f64 = self.q.iter().map(|v| v * v).sum();
        (p * p + q + self.r * self.r).sqrt()
    }

    /// Bordered matrix `[[P, q/2], [qᵀ/2, r]]` whose quadratic form at
    /// `(x, 1)` is the value of the form.
    pub fn bordered(&self) -> SymMatrix {
        let n = self.dim();
        let mut b = SymMatrix::zeros(n + 1);
        for i in 0..n {
            for j in i..n {
                b.set(i, j, self.p.get(i, j));
            }
            b.set(i, n, 0.5 * self.q[i]);
        }
        b.set(n, n, self.r);
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Leq,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub form: QuadraticForm,
    pub sense: Sense,
}

/// Mixed-integer QCQP. Coordinates `0..num_integer` are integer-valued.
#[derive(Clone, Debug, PartialEq)]
pub struct QcqpProblem {
    n: usize,
    num_integer: usize,
    objective: QuadraticForm,
    constraints: Vec<Constraint>,
}

impl QcqpProblem {
    pub fn new(num_integer: usize, objective: QuadraticForm) -> Result<Self> {
        let n = objective.dim();
        if num_integer > n {
            return Err(Error::InvalidProblem(format!(
                "integer count {num_integer} exceeds dimension {n}"
            )));
        }
        Ok(QcqpProblem { n, num_integer, objective, constraints: Vec::new() })
    }

    pub fn push(&mut self, form: QuadraticForm, sense: Sense) -> Result<()> {
        if form.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: form.dim() });
        }
        self.constraints.push(Constraint { form, sense });
        Ok(())
    }

    pub fn with(mut self, form: QuadraticForm, sense: Sense) -> Result<Self> {
        self.push(form, sense)?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_integer(&self) -> usize {
        self.num_integer
    }

    pub fn is_pure_integer(&self) -> bool {
        self.num_integer == self.n
    }

    pub fn objective(&self) -> &QuadraticForm {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn is_normalized(&self) -> bool {
        self.constraints.iter().all(|c| c.sense == Sense::Leq)
    }

    /// Replaces each equality `f = 0` by the pair `f ≤ 0`, `−f ≤ 0`, keeping
    /// the relative order of all constraints.
    pub fn normalize_equalities(&self) -> QcqpProblem {
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            match c.sense {
                Sense::Leq => constraints.push(c.clone()),
                Sense::Eq => {
                    constraints.push(Constraint { form: c.form.clone(), sense: Sense::Leq });
                    constraints.push(Constraint { form: c.form.negated(), sense: Sense::Leq });
                }
            }
        }
        QcqpProblem {
            n: self.n,
            num_integer: self.num_integer,
            objective: self.objective.clone(),
            constraints,
        }
    }

    /// Whether `x` satisfies every constraint within `tol` (integrality is
    /// not checked).
    pub fn constraints_hold(&self, x: &[f64], tol: f64) -> Result<bool> {
        for c in &self.constraints {
            let v = c.form.evaluate(x)?;
            let ok = match c.sense {
                Sense::Leq => v <= tol,
                Sense::Eq => v.abs() <= tol,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_integer_feasible(&self, x: &[f64], tol: f64) -> Result<bool> {
        let integral = x[..self.num_integer.min(x.len())]
            .iter()
            .all(|v| (v - v.round()).abs() <= tol);
        Ok(integral && self.constraints_hold(x, tol)?)
    }

    /// Reorders variables: new coordinate `k` is old coordinate `perm[k]`.
    /// The integer count is unchanged, so callers put integer variables
    /// first in `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<QcqpProblem> {
        let n = self.n;
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
        }
        let mut seen = vec![false; n];
        for &k in perm {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidArgument(format!("not a permutation: {perm:?}")));
            }
        }
        let permute = |f: &QuadraticForm| {
            let mut p = SymMatrix::zeros(n);
            for i in 0..n {
                for j in i..n {
                    p.set(i, j, f.p.get(perm[i], perm[j]));
                }
            }
            QuadraticForm { p, q: perm.iter().map(|&k| f.q[k]).collect(), r: f.r }
        };
        Ok(QcqpProblem {
            n,
            num_integer: self.num_integer,
            objective: permute(&self.objective),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint { form: permute(&c.form), sense: c.sense })
                .collect(),
        })
    }

    /// Moves the variables listed in `integer_vars` to the front (in the
    /// given order) and marks them integer. Returns the problem and the
    /// permutation used (new index → old index).
    pub fn with_integer_variables(&self, integer_vars: &[usize]) -> Result<(QcqpProblem, Vec<usize>)> {
        let mut perm: Vec<usize> = integer_vars.to_vec();
        let chosen: HashSet<usize> = integer_vars.iter().copied().collect();
        if chosen.len() != integer_vars.len() {
            return Err(Error::InvalidArgument("duplicate integer variable".into()));
        }
        perm.extend((0..self.n).filter(|k| !chosen.contains(k)));
        let mut out = self.permuted(&perm)?;
        out.num_integer = integer_vars.len();
        Ok((out, perm))
    }
}

/// Where a lifted constraint came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    /// Index into the normalized constraint list of the source problem.
    Original(usize),
    /// Index into the cut list the lift was built from.
    Cut(usize),
    /// Branching inequality, numbered along the path from the root.
    Branch(usize),
    /// Variable bound `x_var ≤ value` (`upper`) or `x_var ≥ value`.
    Bound { var: usize, upper: bool },
    /// `‖x − ½·1‖² ≥ n/4`.
    Sphere,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original(i) => write!(f, "original[{i}]"),
            Provenance::Cut(i) => write!(f, "cut[{i}]"),
            Provenance::Branch(i) => write!(f, "branch[{i}]"),
            Provenance::Bound { var, upper: true } => write!(f, "upper[{var}]"),
            Provenance::Bound { var, upper: false } => write!(f, "lower[{var}]"),
            Provenance::Sphere => write!(f, "sphere"),
        }
    }
}

/// Integer linear inequality `cᵀx ≤ d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearIneq {
    pub c: Vec<i64>,
    pub d: i64,
}

impl LinearIneq {
    pub fn holds(&self, x: &[f64], tol: f64) -> bool {
        self.lhs(x) <= self.d as f64 + tol
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(&c, &v)| c as f64 * v).sum()
    }

    /// The complementary side `cᵀx ≥ d + 1`, written as `(−c)ᵀx ≤ −d − 1`.
    pub fn complement(&self) -> LinearIneq {
        LinearIneq { c: self.c.iter().map(|v| -v).collect(), d: -self.d - 1 }
    }
}

/// Affine functional of `(X, x)` as it enters the lifted problem.
#[derive(Clone, Debug, PartialEq)]
pub enum LiftedRow {
    /// `Tr(P X) + qᵀx + r`.
    Quadratic(QuadraticForm),
    /// `−Tr(aaᵀX) + (2b+1)aᵀx − b(b+1)`.
    Cut(Cut),
    /// `cᵀx − d`.
    Linear(LinearIneq),
}

/// One lifted inequality `row(X, x) − shift ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedConstraint {
    pub tag: Provenance,
    pub row: LiftedRow,
    pub shift: f64,
}

impl LiftedConstraint {
    pub fn evaluate(&self, big_x: &SymMatrix, x: &[f64]) -> f64 {
        let v = match &self.row {
            LiftedRow::Quadratic(f) => {
                let lin: f64 = f.q.iter().zip(x).map(|(a, b)| a * b).sum();
                f.p.inner(big_x) + lin + f.r
            }
            LiftedRow::Cut(cut) => cut.violation(big_x, x),
            LiftedRow::Linear(l) => l.lhs(x) - l.d as f64,
        };
        v - self.shift
    }

    /// Dense `(P, q, r)` of the functional, shift included.
    pub fn to_form(&self, n: usize) -> QuadraticForm {
        let base = match &self.row {
            LiftedRow::Quadratic(f) => f.clone(),
            LiftedRow::Cut(cut) => cut.as_form(n),
            LiftedRow::Linear(l) => {
                QuadraticForm::linear(l.c.iter().map(|&v| v as f64).collect(), -(l.d as f64))
            }
        };
        base.with_offset(-self.shift)
    }
}

/// The SDP relaxation: minimize the lifted objective over `(X, x)` subject to
/// every lifted constraint and `[[X, x], [xᵀ, 1]] ⪰ 0`.
#[derive(Clone, Debug)]
pub struct LiftedSdp {
    n: usize,
    num_integer: usize,
    objective: QuadraticForm,
    constraints: Vec<LiftedConstraint>,
}

impl LiftedSdp {
    pub fn new(n: usize, num_integer: usize, objective: QuadraticForm) -> Result<Self> {
        if objective.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: objective.dim() });
        }
        Ok(LiftedSdp { n, num_integer, objective, constraints: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_integer(&self) -> usize {
        self.num_integer
    }

    pub fn objective(&self) -> &QuadraticForm {
        &self.objective
    }

    pub fn constraints(&self) -> &[LiftedConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn index_of(&self, tag: Provenance) -> Option<usize> {
        self.constraints.iter().position(|c| c.tag == tag)
    }

    pub fn push(&mut self, tag: Provenance, row: LiftedRow) -> Result<()> {
        if self.index_of(tag).is_some() {
            return Err(Error::InvalidProblem(format!("duplicate constraint tag {tag}")));
        }
        let dim = match &row {
            LiftedRow::Quadratic(f) => f.dim(),
            LiftedRow::Cut(c) => c.a().len(),
            LiftedRow::Linear(l) => l.c.len(),
        };
        if dim != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: dim });
        }
        if let LiftedRow::Cut(cut) = &row {
            cut.check_support(self.num_integer)?;
        }
        self.constraints.push(LiftedConstraint { tag, row, shift: 0.0 });
        Ok(())
    }

    /// Copy with constraint `tag` relaxed to `row ≤ u`.
    pub fn perturbed(&self, tag: Provenance, u: f64) -> Result<LiftedSdp> {
        let idx = self.index_of(tag).ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
        let mut out = self.clone();
        out.constraints[idx].shift += u;
        Ok(out)
    }

    pub fn remove(&mut self, tag: Provenance) -> Option<LiftedConstraint> {
        let idx = self.index_of(tag)?;
        Some(self.constraints.remove(idx))
    }

    pub fn objective_value(&self, big_x: &SymMatrix, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.q.iter().zip(x).map(|(a, b)| a * b).sum();
        self.objective.p.inner(big_x) + lin + self.objective.r
    }

    /// Largest constraint value at `(X, x)`; `≤ 0` means feasible.
    pub fn max_violation(&self, big_x: &SymMatrix, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.evaluate(big_x, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Builds the SDP relaxation of `problem` strengthened by `cuts`.
/// Equalities are normalized first; `Original(i)` tags index the normalized
/// constraint list.
pub fn lift(problem: &QcqpProblem, cuts: &[Cut]) -> Result<LiftedSdp> {
    let normalized;
    let problem = if problem.is_normalized() {
        problem
    } else {
        normalized = problem.normalize_equalities();
        &normalized
    };
    let mut sdp = LiftedSdp::new(problem.n, problem.num_integer, problem.objective.clone())?;
    for (i, c) in problem.constraints.iter().enumerate() {
        sdp.push(Provenance::Original(i), LiftedRow::Quadratic(c.form.clone()))?;
    }
    for (i, cut) in cuts.iter().enumerate() {
        sdp.push(Provenance::Cut(i), LiftedRow::Cut(cut.clone()))?;
    }
    Ok(sdp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn concave_example() -> QcqpProblem {
        let obj = QuadraticForm::new(SymMatrix::identity(2).scaled(-1.0), vec![0.0; 2], 0.0).unwrap();
        let ball = QuadraticForm::new(SymMatrix::identity(2), vec![0.0; 2], -1.2).unwrap();
        QcqpProblem::new(2, obj).unwrap().with(ball, Sense::Leq).unwrap()
    }

    #[test]
    fn constant_form() {
        let f = QuadraticForm::constant(3, 3.0);
        assert_eq!(f.evaluate(&[1.0, -7.0, 2.5]).unwrap(), 3.0);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let f = QuadraticForm::constant(3, 0.0);
        assert!(matches!(f.evaluate(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn symmetrized_on_construction() {
        let f = QuadraticForm::from_row_major(2, &[1.0, 4.0, 0.0, 2.0], vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(f.p().get(0, 1), 2.0);
        assert_eq!(f.p().get(1, 0), 2.0);
        // same quadratic form as the unsymmetrized data
        let x = [0.3, -1.7];
        let raw = 1.0 * x[0] * x[0] + 4.0 * x[0] * x[1] + 2.0 * x[1] * x[1];
        assert_abs_diff_eq!(f.evaluate(&x).unwrap(), raw, epsilon = 1e-14);
    }

    #[test]
    fn triangle_maxcut_objective() {
        let w = instances::triangle();
        // (1/2) Σ_{i<j} W_ij (1 − x_i x_j) as a quadratic form in x
        let mut p = SymMatrix::zeros(3);
        let mut r = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                p.set(i, j, -0.25 * w.get(i, j));
                r += 0.5 * w.get(i, j);
            }
        }
        let f = QuadraticForm::new(p, vec![0.0; 3], r).unwrap();
        assert_abs_diff_eq!(f.evaluate(&[1.0, 1.0, -1.0]).unwrap(), 2.0, epsilon = 1e-14);
        // enumerate all sign vectors: the max is 2
        let best = (0..8)
            .map(|m| {
                let x: Vec<f64> = (0..3).map(|k| if m >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
                f.evaluate(&x).unwrap()
            })
            .fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(best, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn ils_objective_vanishes_at_continuous_point() {
        let inst = instances::gen_ils_instance(6, 3).unwrap();
        let f = inst.problem().objective().evaluate(&inst.x_cts).unwrap();
        assert!(f.abs() < 1e-10);
    }

    #[test]
    fn normalize_cases() {
        let p = QcqpProblem::new(1, QuadraticForm::constant(1, 0.0)).unwrap();
        assert_eq!(p.normalize_equalities(), p);

        let f = QuadraticForm::from_row_major(1, &[2.0], vec![-1.0], 0.5).unwrap();
        let p = p.with(f.clone(), Sense::Eq).unwrap();
        let norm = p.normalize_equalities();
        assert_eq!(norm.constraints().len(), 2);
        assert_eq!(norm.constraints()[0].form, f);
        assert_eq!(norm.constraints()[1].form, f.negated());
        assert!(norm.is_normalized());
        assert_eq!(norm.normalize_equalities(), norm);
    }

    #[test]
    fn normalize_preserves_inequality_order() {
        let a = QuadraticForm::linear(vec![1.0], -1.0);
        let b = QuadraticForm::linear(vec![2.0], 0.0);
        let c = QuadraticForm::linear(vec![3.0], 1.0);
        let p = QcqpProblem::new(1, QuadraticForm::constant(1, 0.0))
            .unwrap()
            .with(a.clone(), Sense::Leq)
            .unwrap()
            .with(b.clone(), Sense::Eq)
            .unwrap()
            .with(c.clone(), Sense::Leq)
            .unwrap();
        let forms: Vec<_> = p.normalize_equalities().constraints().iter().map(|c| c.form.clone()).collect();
        assert_eq!(forms, vec![a, b.clone(), b.negated(), c]);
    }

    #[test]
    fn maxcut_equalities_double() {
        let w = instances::random_graph(7, 0.5, 2);
        let p = instances::maxcut_to_qcqp(&w).unwrap();
        assert_eq!(p.constraints().len(), 7);
        assert_eq!(p.normalize_equalities().constraints().len(), 14);
    }

    #[test]
    fn lift_without_constraints() {
        let p = QcqpProblem::new(0, QuadraticForm::constant(2, 1.0)).unwrap();
        let sdp = lift(&p, &[]).unwrap();
        assert!(sdp.is_empty());
    }

    #[test]
    fn lift_concave_example() {
        let sdp = lift(&concave_example(), &[]).unwrap();
        assert_eq!(sdp.len(), 1);
        let big_x = SymMatrix::identity(2).scaled(0.6);
        let x = [0.0, 0.0];
        // objective −Tr X, constraint Tr X − 1.2
        assert_abs_diff_eq!(sdp.objective_value(&big_x, &x), -1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(sdp.constraints()[0].evaluate(&big_x, &x), 0.0, epsilon = 1e-14);
        let form = sdp.constraints()[0].to_form(2);
        assert_eq!(form.p(), &SymMatrix::identity(2));
        assert_eq!(form.r(), -1.2);
    }

    #[test]
    fn lift_cut_row_data() {
        let p = QcqpProblem::new(2, QuadraticForm::constant(2, 0.0)).unwrap();
        let sdp = lift(&p, &[Cut::new(vec![1, 1], 0).unwrap()]).unwrap();
        let form = sdp.constraints()[0].to_form(2);
        assert_eq!(form.p(), &SymMatrix::from_row_major(2, &[-1.0, -1.0, -1.0, -1.0]).unwrap());
        assert_eq!(form.q(), &[1.0, 1.0]);
        assert_eq!(form.r(), 0.0);
    }

    #[test]
    fn lift_rejects_cut_on_continuous_coordinate() {
        let p = QcqpProblem::new(1, QuadraticForm::constant(2, 0.0)).unwrap();
        let err = lift(&p, &[Cut::new(vec![0, 1], 0).unwrap()]).unwrap_err();
        assert!(matches!(err, Error::InvalidCut(_)));
    }

    #[test]
    fn duplicate_tags_rejected() {
        let mut sdp = LiftedSdp::new(1, 1, QuadraticForm::constant(1, 0.0)).unwrap();
        let row = LiftedRow::Linear(LinearIneq { c: vec![1], d: 0 });
        sdp.push(Provenance::Branch(0), row.clone()).unwrap();
        assert!(sdp.push(Provenance::Branch(0), row).is_err());
    }

    #[test]
    fn rank_one_points_satisfy_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(1..6);
            let p = n;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
            // constraint satisfied at x by construction
            let g = SymMatrix::from_matrix(&nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)));
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut f = QuadraticForm::new(g.clone(), q.clone(), 0.0).unwrap();
            let v = f.evaluate(&x).unwrap();
            f = f.with_offset(-v - rng.gen_range(0.0..1.0));
            let problem = QcqpProblem::new(p, QuadraticForm::new(g, q, 0.3).unwrap())
                .unwrap()
                .with(f, Sense::Leq)
                .unwrap();
            let cuts: Vec<Cut> = (0..5)
                .filter_map(|_| {
                    let a: Vec<i64> = (0..n).map(|_| rng.gen_range(-2..=2)).collect();
                    Cut::new(a, rng.gen_range(-4..=4)).ok()
                })
                .collect();
            let sdp = lift(&problem, &cuts).unwrap();
            let big_x = SymMatrix::outer(&x);
            assert!(sdp.max_violation(&big_x, &x) <= 1e-9);
            let direct = problem.objective().evaluate(&x).unwrap();
            assert_abs_diff_eq!(sdp.objective_value(&big_x, &x), direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn perturbation_shifts_one_row() {
        let sdp = lift(&concave_example(), &[]).unwrap();
        let pert = sdp.perturbed(Provenance::Original(0), -0.2).unwrap();
        let big_x = SymMatrix::identity(2).scaled(0.5);
        assert_abs_diff_eq!(pert.constraints()[0].evaluate(&big_x, &[0.0, 0.0]), 0.0, epsilon = 1e-14);
        assert!(matches!(sdp.perturbed(Provenance::Cut(3), 0.1), Err(Error::UnknownTag(_))));
    }

    #[test]
    fn permutation_moves_integer_variables_first() {
        let obj = QuadraticForm::from_row_major(3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 2.0, 0.0, 5.0], vec![1.0, 2.0, 3.0], 0.0)
            .unwrap();
        let p = QcqpProblem::new(0, obj).unwrap();
        let (q, perm) = p.with_integer_variables(&[2]).unwrap();
        assert_eq!(perm, vec![2, 0, 1]);
        assert_eq!(q.num_integer(), 1);
        let x_old = [0.5, -1.0, 2.0];
        let x_new: Vec<f64> = perm.iter().map(|&k| x_old[k]).collect();
        assert_abs_diff_eq!(
            p.objective().evaluate(&x_old).unwrap(),
            q.objective().evaluate(&x_new).unwrap(),
            epsilon = 1e-12
        );
    }
}
