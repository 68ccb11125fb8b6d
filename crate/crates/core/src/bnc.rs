//! Branch-and-cut for pure integer problems.
//!
//! Every node is the original problem restricted by integer box bounds,
//! general branching inequalities `cᵀx ≤ d`, and its own pool of lattice
//! cuts. A node is solved as a lifted relaxation, tightened by a few cut
//! rounds and then split by a pair of complementary integer inequalities.
//! Fixed variables are substituted out before lifting so every relaxation
//! keeps an interior.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::certificate::certified_bound;
use crate::cutloop::{separate, CutLoopConfig, Strategy};
use crate::cuts::Cut;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{LiftedRow, LiftedSdp, LinearIneq, Provenance, QcqpProblem, QuadraticForm};
use crate::oracle::IntBox;
use crate::rounding::ils_round;
use crate::sdp::{solve, SdpSolution, SdpStatus, SolverSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeSelection {
    BestBound,
    Dfs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Branching {
    DualCut,
    MostFractional,
}

impl FromStr for Branching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dual" | "dual_cut" | "dual-cut" => Ok(Branching::DualCut),
            "frac" | "most_fractional" | "most-fractional" => Ok(Branching::MostFractional),
            _ => Err(Error::InvalidArgument(format!("unknown branching rule {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BncConfig {
    pub node_selection: NodeSelection,
    pub max_nodes: usize,
    /// Separation rounds at the root.
    pub root_cut_rounds: usize,
    /// Separation rounds at every other node.
    pub node_cut_rounds: usize,
    pub int_tol: f64,
    pub branching: Branching,
    pub seed: u64,
    pub solver: SolverSettings,
    pub cut_strategy: Strategy,
    /// Cuts added per separation round; `None` means `4n`.
    pub cuts_per_round: Option<usize>,
    pub cert_tol: f64,
    /// A node is fathomed when its bound is at least `f* − fathom_tol·(1 + |f*|)`.
    pub fathom_tol: f64,
    /// Gaussian rounding samples drawn at the root for a first incumbent.
    pub heuristic_samples: usize,
    /// Nodes evaluated concurrently.
    pub threads: usize,
    pub initial_incumbent: Option<Vec<i64>>,
    /// Explicit box on top of the bounds implied by the constraints.
    pub bounds: Option<IntBox>,
}

impl Default for BncConfig {
    fn default() -> Self {
        BncConfig {
            node_selection: NodeSelection::BestBound,
            max_nodes: 100_000,
            root_cut_rounds: 2,
            node_cut_rounds: 1,
            int_tol: 1e-6,
            branching: Branching::DualCut,
            seed: 0,
            solver: SolverSettings::default(),
            cut_strategy: Strategy::Combined,
            cuts_per_round: None,
            cert_tol: 1e-6,
            fathom_tol: 1e-6,
            heuristic_samples: 100,
            threads: 1,
            initial_incumbent: None,
            bounds: None,
        }
    }
}

impl BncConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 {
            return Err(Error::InvalidArgument("max_nodes must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        if !(self.int_tol > 0.0 && self.int_tol < 0.5) {
            return Err(Error::InvalidArgument("int_tol must lie in (0, 0.5)".into()));
        }
        self.solver.validate()
    }

    fn cut_config(&self, n: usize) -> CutLoopConfig {
        CutLoopConfig {
            strategy: self.cut_strategy,
            cuts_per_round: Some(self.cuts_per_round.unwrap_or(4 * n.max(1))),
            seed: self.seed,
            solver: self.solver.clone(),
            cert_tol: self.cert_tol,
            ..CutLoopConfig::default()
        }
    }

    fn fathoms(&self, bound: f64, f_star: f64) -> bool {
        f_star.is_finite() && bound >= f_star - self.fathom_tol * (1.0 + f_star.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BncStatus {
    Optimal,
    NodeLimit,
    Infeasible,
}

impl fmt::Display for BncStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BncStatus::Optimal => "OPTIMAL",
            BncStatus::NodeLimit => "NODE_LIMIT",
            BncStatus::Infeasible => "INFEASIBLE",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BncResult {
    pub status: BncStatus,
    pub x_star: Option<Vec<i64>>,
    /// `+∞` without an incumbent.
    pub f_star: f64,
    /// Nodes whose relaxation was solved.
    pub nodes: usize,
    /// Global lower bound: the smallest bound over open and closed leaves.
    pub lower_bound: f64,
    pub root_bound: f64,
    pub max_depth: usize,
    /// One progress line per evaluated node.
    pub log: Vec<String>,
}

/// Branching inequality for a node, in the coordinates of its lift.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// Children get `cᵀx ≤ d` and `cᵀx ≥ d + 1`.
    pub ineq: LinearIneq,
    /// Cut constraint made redundant by the branch.
    pub removed: Option<Provenance>,
}

fn most_fractional(x: &[f64], int_tol: f64) -> Result<Branch> {
    let mut best: Option<(f64, usize)> = None;
    for (i, &v) in x.iter().enumerate() {
        let dist = (v - v.round()).abs();
        if dist > int_tol && best.is_none_or(|b| dist > b.0) {
            best = Some((dist, i));
        }
    }
    let (_, i) = best.ok_or(Error::NoBranch)?;
    let mut c = vec![0; x.len()];
    c[i] = 1;
    Ok(Branch { ineq: LinearIneq { c, d: x[i].floor() as i64 }, removed: None })
}

/// Picks the branching inequality at a relaxation solution.
///
/// With [`Branching::DualCut`], the cut constraint `(a, b)` with the largest
/// multiplier above `1e−6` gives `(c, d) = (a, b)`, provided `aᵀx̂` lies
/// strictly inside `(b, b + 1)` so both children exclude `x̂`; ties go to the
/// lexicographically smallest `a`. Otherwise, and for
/// [`Branching::MostFractional`], the coordinate farthest from an integer is
/// split at `⌊x̂_i⌋`.
pub fn select_branching(solution: &SdpSolution, lift: &LiftedSdp, config: &BncConfig) -> Result<Branch> {
    if solution.duals.len() != lift.len() {
        return Err(Error::DimensionMismatch { expected: lift.len(), got: solution.duals.len() });
    }
    let tol = config.int_tol;
    if config.branching == Branching::DualCut {
        let mut best: Option<(f64, &Cut, Provenance)> = None;
        for (c, &dual) in lift.constraints().iter().zip(&solution.duals) {
            let LiftedRow::Cut(cut) = &c.row else { continue };
            if dual <= 1e-6 {
                continue;
            }
            let t: f64 = cut.a().iter().zip(&solution.x).map(|(&a, &x)| a as f64 * x).sum();
            let b = cut.b() as f64;
            if !(t > b + tol && t < b + 1.0 - tol) {
                continue;
            }
            let wins = match &best {
                None => true,
                Some((d, a, _)) => dual > *d || (dual == *d && cut.a() < a.a()),
            };
            if wins {
                best = Some((dual, cut, c.tag));
            }
        }
        if let Some((_, cut, tag)) = best {
            return Ok(Branch { ineq: LinearIneq { c: cut.a().to_vec(), d: cut.b() }, removed: Some(tag) });
        }
    }
    most_fractional(&solution.x, tol)
}

/// Rounds `x̂` and keeps it if it satisfies every original constraint within
/// `tol`. The value is `f₀` at the rounded point.
pub fn try_incumbent(solution: &SdpSolution, problem: &QcqpProblem, tol: f64) -> Option<(Vec<i64>, f64)> {
    incumbent_at(problem, solution.x.iter().map(|v| v.round() as i64).collect(), tol)
}

fn incumbent_at(problem: &QcqpProblem, x: Vec<i64>, tol: f64) -> Option<(Vec<i64>, f64)> {
    if x.len() != problem.n() {
        return None;
    }
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    if !problem.constraints_hold(&xf, tol).ok()? {
        return None;
    }
    let f = problem.objective().evaluate(&xf).ok()?;
    Some((x, f))
}

type Bounds = (Vec<Option<i64>>, Vec<Option<i64>>);

/// `x_i ∈ c_i ± √(ρ (P⁻¹)_ii)` for `xᵀPx + qᵀx + r ≤ 0` with `P ≻ 0`, where
/// `c = −P⁻¹q/2` and `ρ = cᵀPc − r`. `Some(None)` means the set is empty.
fn ellipsoid_box(form: &QuadraticForm) -> Option<Option<Vec<(f64, f64)>>> {
    let n = form.dim();
    let chol = Cholesky::new(form.p().as_matrix().clone())?;
    let q = DVector::from_column_slice(form.q());
    let center = chol.solve(&q) * -0.5;
    let rho = center.dot(&(form.p().as_matrix() * &center)) - form.r();
    if rho < 0.0 {
        return Some(None);
    }
    let inv = chol.inverse();
    Some(Some((0..n).map(|i| {
        let w = (rho * inv[(i, i)].max(0.0)).sqrt();
        (center[i] - w, center[i] + w)
    }).collect()))
}

/// Interval of `p x² + q x + r ≤ 0` in one variable; `None` when unbounded
/// on both sides, `lo > hi` when empty.
fn univariate(p: f64, q: f64, r: f64) -> Option<(f64, f64)> {
    if p > 0.0 {
        let disc = q * q - 4.0 * p * r;
        if disc < 0.0 {
            return Some((1.0, 0.0));
        }
        let s = disc.sqrt();
        Some(((-q - s) / (2.0 * p), (-q + s) / (2.0 * p)))
    } else if p == 0.0 && q != 0.0 {
        let root = -r / q;
        Some(if q > 0.0 { (f64::NEG_INFINITY, root) } else { (root, f64::INFINITY) })
    } else if p == 0.0 && q == 0.0 {
        if r > 0.0 {
            Some((1.0, 0.0))
        } else {
            None
        }
    } else {
        None
    }
}

fn tighten_with(bounds: &mut Bounds, i: usize, lo: f64, hi: f64) {
    const FUZZ: f64 = 1e-9;
    if lo.is_finite() {
        let l = (lo - FUZZ * (1.0 + lo.abs())).ceil() as i64;
        bounds.0[i] = Some(bounds.0[i].map_or(l, |v| v.max(l)));
    }
    if hi.is_finite() {
        let h = (hi + FUZZ * (1.0 + hi.abs())).floor() as i64;
        bounds.1[i] = Some(bounds.1[i].map_or(h, |v| v.min(h)));
    }
}

fn mark_empty(bounds: &mut Bounds) {
    for i in 0..bounds.0.len() {
        bounds.0[i] = Some(1);
        bounds.1[i] = Some(0);
    }
}

fn apply_form(bounds: &mut Bounds, form: &QuadraticForm) {
    let n = form.dim();
    let p = form.p();
    let support: Vec<usize> = (0..n)
        .filter(|&i| form.q()[i] != 0.0 || (0..n).any(|j| p.get(i, j) != 0.0))
        .collect();
    match support.as_slice() {
        [] => {
            if form.r() > 0.0 {
                mark_empty(bounds);
            }
        }
        [i] => match univariate(p.get(*i, *i), form.q()[*i], form.r()) {
            Some((lo, hi)) if lo > hi => mark_empty(bounds),
            Some((lo, hi)) => tighten_with(bounds, *i, lo, hi),
            None => {}
        },
        _ => match ellipsoid_box(form) {
            Some(Some(iv)) => {
                for (i, (lo, hi)) in iv.into_iter().enumerate() {
                    tighten_with(bounds, i, lo, hi);
                }
            }
            Some(None) => mark_empty(bounds),
            None => {}
        },
    }
}

/// Integer bounds implied by single-variable constraints and by
/// constraints with a positive definite Hessian.
pub fn implied_box(problem: &QcqpProblem) -> Bounds {
    let n = problem.n();
    let mut bounds = (vec![None; n], vec![None; n]);
    for c in problem.normalize_equalities().constraints() {
        apply_form(&mut bounds, &c.form);
    }
    bounds
}

/// Bounds on `{x : f₀(x) ≤ level}` when `P₀ ≻ 0`.
pub fn level_set_box(problem: &QcqpProblem, level: f64) -> Option<Bounds> {
    let n = problem.n();
    let form = problem.objective().with_offset(-level);
    let iv = ellipsoid_box(&form)?;
    let mut bounds = (vec![None; n], vec![None; n]);
    match iv {
        Some(iv) => {
            for (i, (lo, hi)) in iv.into_iter().enumerate() {
                tighten_with(&mut bounds, i, lo, hi);
            }
        }
        None => mark_empty(&mut bounds),
    }
    Some(bounds)
}

fn intersect(a: &Bounds, b: &Bounds) -> Bounds {
    let pick = |x: Option<i64>, y: Option<i64>, f: fn(i64, i64) -> i64| match (x, y) {
        (Some(u), Some(v)) => Some(f(u, v)),
        (u, v) => u.or(v),
    };
    (
        a.0.iter().zip(&b.0).map(|(&x, &y)| pick(x, y, i64::max)).collect(),
        a.1.iter().zip(&b.1).map(|(&x, &y)| pick(x, y, i64::min)).collect(),
    )
}

#[derive(Clone, Debug)]
struct Node {
    id: usize,
    depth: usize,
    /// Lower bound inherited from the parent.
    bound: f64,
    bounds: Bounds,
    branches: Vec<LinearIneq>,
    cuts: Vec<Cut>,
}

/// Node relaxation over the free variables.
struct NodeLift {
    sdp: LiftedSdp,
    free: Vec<usize>,
    fixed: Vec<Option<i64>>,
    /// `Cut(k)` in `sdp` is `cuts[cut_of[k]]` of the node.
    cut_of: Vec<usize>,
    /// Effective box of the node in full coordinates.
    lo: Vec<Option<i64>>,
    hi: Vec<Option<i64>>,
}

enum Built {
    Lift(Box<NodeLift>),
    Point(Vec<i64>),
    Infeasible,
}

/// `f` with the fixed coordinates substituted.
fn restrict_form(form: &QuadraticForm, free: &[usize], fixed: &[Option<i64>]) -> QuadraticForm {
    let p = form.p();
    let nf = free.len();
    let fixed_idx: Vec<(usize, f64)> = fixed.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v as f64))).collect();
    let mut pr = SymMatrix::zeros(nf);
    let mut q = vec![0.0; nf];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate().skip(a) {
            pr.set(a, b, p.get(i, j));
        }
        q[a] = form.q()[i] + 2.0 * fixed_idx.iter().map(|&(k, v)| p.get(i, k) * v).sum::<f64>();
    }
    let mut r = form.r();
    for &(k, v) in &fixed_idx {
        r += form.q()[k] * v;
        for &(l, w) in &fixed_idx {
            r += p.get(k, l) * v * w;
        }
    }
    QuadraticForm::new(pr, q, r).expect("restricted dimensions agree")
}

fn restrict_int(c: &[i64], free: &[usize], fixed: &[Option<i64>]) -> (Vec<i64>, i64) {
    let cf = free.iter().map(|&i| c[i]).collect();
    let offset = fixed.iter().zip(c).filter_map(|(v, &ci)| v.map(|v| v * ci)).sum();
    (cf, offset)
}

struct Ctx<'a> {
    problem: &'a QcqpProblem,
    normalized: QcqpProblem,
    config: &'a BncConfig,
}

impl Ctx<'_> {
    fn build(&self, node: &Node, global: &Bounds) -> Result<Built> {
        let n = self.problem.n();
        let (lo, hi) = intersect(&node.bounds, global);
        if (0..n).any(|i| matches!((lo[i], hi[i]), (Some(l), Some(h)) if l > h)) {
            return Ok(Built::Infeasible);
        }
        let fixed: Vec<Option<i64>> =
            (0..n).map(|i| match (lo[i], hi[i]) { (Some(l), Some(h)) if l == h => Some(l), _ => None }).collect();
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();

        if free.is_empty() {
            let x: Vec<i64> = fixed.iter().map(|v| v.unwrap()).collect();
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let ok = node.branches.iter().all(|b| b.holds(&xf, 0.0))
                && self.problem.constraints_hold(&xf, 1e-9)?;
            return Ok(if ok { Built::Point(x) } else { Built::Infeasible });
        }

        let nf = free.len();
        let tol = 1e-9;
        let mut sdp = LiftedSdp::new(nf, nf, restrict_form(self.normalized.objective(), &free, &fixed))?;
        for (k, c) in self.normalized.constraints().iter().enumerate() {
            let f = restrict_form(&c.form, &free, &fixed);
            if f.p().frobenius_norm() == 0.0 && f.q().iter().all(|&v| v == 0.0) {
                if f.r() > tol * (1.0 + c.form.norm()) {
                    return Ok(Built::Infeasible);
                }
                continue;
            }
            sdp.push(Provenance::Original(k), LiftedRow::Quadratic(f))?;
        }

        let mut unit_width = vec![false; nf];
        for (a, &i) in free.iter().enumerate() {
            let mut e = SymMatrix::zeros(nf);
            e.set(a, a, 1.0);
            let mut q = vec![0.0; nf];
            match (lo[i], hi[i]) {
                (Some(l), Some(h)) => {
                    // (x − l)(x − h) ≤ 0, an equality when h = l + 1
                    q[a] = -((l + h) as f64);
                    let f = QuadraticForm::new(e, q, (l * h) as f64)?;
                    if h == l + 1 {
                        unit_width[a] = true;
                        sdp.push(Provenance::Bound { var: i, upper: false }, LiftedRow::Quadratic(f.negated()))?;
                    }
                    sdp.push(Provenance::Bound { var: i, upper: true }, LiftedRow::Quadratic(f))?;
                }
                (Some(l), None) => {
                    let mut c = vec![0; nf];
                    c[a] = -1;
                    sdp.push(Provenance::Bound { var: i, upper: false }, LiftedRow::Linear(LinearIneq { c, d: -l }))?;
                }
                (None, Some(h)) => {
                    let mut c = vec![0; nf];
                    c[a] = 1;
                    sdp.push(Provenance::Bound { var: i, upper: true }, LiftedRow::Linear(LinearIneq { c, d: h }))?;
                }
                (None, None) => {}
            }
        }

        for (k, b) in node.branches.iter().enumerate() {
            let (c, offset) = restrict_int(&b.c, &free, &fixed);
            let d = b.d - offset;
            if c.iter().all(|&v| v == 0) {
                if d < 0 {
                    return Ok(Built::Infeasible);
                }
                continue;
            }
            sdp.push(Provenance::Branch(k), LiftedRow::Linear(LinearIneq { c, d }))?;
        }

        let mut seen = HashSet::new();
        let mut cut_of = Vec::new();
        for (k, cut) in node.cuts.iter().enumerate() {
            let (a, offset) = restrict_int(cut.a(), &free, &fixed);
            let support: Vec<usize> = (0..nf).filter(|&i| a[i] != 0).collect();
            // the box equality already pins every unit cut on that variable
            if support.is_empty() || (support.len() == 1 && unit_width[support[0]] && a[support[0]].abs() == 1) {
                continue;
            }
            let restricted = Cut::new(a, cut.b() - offset)?;
            if !seen.insert(restricted.clone()) {
                continue;
            }
            sdp.push(Provenance::Cut(cut_of.len()), LiftedRow::Cut(restricted))?;
            cut_of.push(k);
        }
        Ok(Built::Lift(Box::new(NodeLift { sdp, free, fixed, cut_of, lo, hi })))
    }
}

impl NodeLift {
    fn expand_x(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.fixed.iter().map(|v| v.map_or(0.0, |v| v as f64)).collect();
        for (a, &i) in self.free.iter().enumerate() {
            out[i] = x[a];
        }
        out
    }

    /// Full-space lifted point: fixed coordinates enter as a rank-one block.
    fn expand(&self, sol: &SdpSolution) -> SdpSolution {
        let x = self.expand_x(&sol.x);
        let n = x.len();
        let mut pos = vec![None; n];
        for (a, &i) in self.free.iter().enumerate() {
            pos[i] = Some(a);
        }
        let mut big_x = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = match (pos[i], pos[j]) {
                    (Some(a), Some(b)) => sol.big_x.get(a, b),
                    _ => x[i] * x[j],
                };
                big_x.set(i, j, v);
            }
        }
        SdpSolution { big_x, x, ..sol.clone() }
    }

    fn expand_int(&self, c: &[i64]) -> Vec<i64> {
        let mut out = vec![0; self.fixed.len()];
        for (a, &i) in self.free.iter().enumerate() {
            out[i] = c[a];
        }
        out
    }
}

enum Outcome {
    Infeasible,
    /// Bound reached the incumbent, or the node is a single point.
    Closed(f64),
    Split(f64, Box<(Node, Node)>),
}

struct Evaluated {
    node_id: usize,
    depth: usize,
    bound: f64,
    outcome: Outcome,
    incumbents: Vec<(Vec<i64>, f64)>,
}

impl Ctx<'_> {
    fn node_bound(&self, sol: &SdpSolution, lift: &LiftedSdp, inherited: f64) -> f64 {
        let b = match certified_bound(sol, lift, self.config.cert_tol) {
            Ok((_, b)) => b,
            Err(e) => {
                log::warn!("node bound not certified: {e}");
                f64::NEG_INFINITY
            }
        };
        b.max(inherited)
    }

    fn evaluate(&self, mut node: Node, global: &Bounds, mut f_star: f64) -> Result<Evaluated> {
        let n = self.problem.n();
        let config = self.config;
        let rounds = if node.id == 0 { config.root_cut_rounds } else { config.node_cut_rounds };
        let cut_config = config.cut_config(n);
        let cap = cut_config.cuts_per_round.unwrap();
        let mut incumbents = Vec::new();
        let done = |node: &Node, bound, outcome, incumbents| {
            Ok(Evaluated { node_id: node.id, depth: node.depth, bound, outcome, incumbents })
        };

        let mut round = 0;
        loop {
            let nl = match self.build(&node, global)? {
                Built::Infeasible => return done(&node, f64::INFINITY, Outcome::Infeasible, incumbents),
                Built::Point(x) => {
                    let Some((x, f)) = incumbent_at(self.problem, x, 1e-9) else {
                        return done(&node, f64::INFINITY, Outcome::Infeasible, incumbents);
                    };
                    incumbents.push((x, f));
                    return done(&node, f, Outcome::Closed(f), incumbents);
                }
                Built::Lift(nl) => nl,
            };
            let sol = solve(&nl.sdp, &config.solver)?;
            match sol.status {
                SdpStatus::PrimalInfeasible => {
                    return done(&node, f64::INFINITY, Outcome::Infeasible, incumbents);
                }
                SdpStatus::UnboundedBelow => {
                    return Err(Error::InvalidProblem(
                        "node relaxation is unbounded; supply box bounds for every variable".into(),
                    ));
                }
                _ => {}
            }
            let bound = self.node_bound(&sol, &nl.sdp, node.bound);
            let full = nl.expand(&sol);
            let mut found = Vec::new();
            if let Some(inc) = try_incumbent(&full, self.problem, 1e-9) {
                found.push(inc);
            }
            if node.id == 0 && round == 0 && config.heuristic_samples > 0 {
                if let Ok(r) = ils_round(&full, self.problem, config.heuristic_samples, config.seed) {
                    found.push((r.x, r.value));
                }
            }
            for (x, f) in found {
                if f < f_star {
                    f_star = f;
                }
                incumbents.push((x, f));
            }
            if config.fathoms(bound, f_star) {
                return done(&node, bound, Outcome::Closed(bound), incumbents);
            }

            if round < rounds {
                let seed = config.seed.wrapping_add((node.id as u64) << 8).wrapping_add(round as u64);
                let fresh = separate(&sol, nl.free.len(), config.cut_strategy, &cut_config, usize::MAX, seed)?
                    .unwrap_or_default();
                let existing: HashSet<Cut> = node.cuts.iter().cloned().collect();
                let mut added = 0;
                for sc in fresh {
                    if added == cap {
                        break;
                    }
                    let cut = Cut::new(nl.expand_int(sc.cut.a()), sc.cut.b())?;
                    if !existing.contains(&cut) {
                        node.cuts.push(cut);
                        added += 1;
                    }
                }
                if added > 0 {
                    round += 1;
                    node.bound = node.bound.max(bound);
                    continue;
                }
            }

            let children = self.split(&node, &nl, &sol, &full)?;
            return done(&node, bound, Outcome::Split(bound, Box::new(children)), incumbents);
        }
    }

    fn split(&self, node: &Node, nl: &NodeLift, sol: &SdpSolution, full: &SdpSolution) -> Result<(Node, Node)> {
        let branch = match select_branching(sol, &nl.sdp, self.config) {
            Ok(b) => b,
            Err(Error::NoBranch) => box_split(nl, full),
            Err(e) => return Err(e),
        };
        let c = nl.expand_int(&branch.ineq.c);
        let left = LinearIneq { c, d: branch.ineq.d };
        let right = left.complement();
        let mut cuts = node.cuts.clone();
        if let Some(Provenance::Cut(k)) = branch.removed {
            cuts.remove(nl.cut_of[k]);
        }
        let child = |ineq: LinearIneq| {
            let mut bounds = node.bounds.clone();
            let mut branches = node.branches.clone();
            let nz: Vec<usize> = (0..ineq.c.len()).filter(|&i| ineq.c[i] != 0).collect();
            match (nz.as_slice(), nz.first().map(|&i| ineq.c[i])) {
                ([i], Some(1)) => bounds.1[*i] = Some(bounds.1[*i].map_or(ineq.d, |h| h.min(ineq.d))),
                ([i], Some(-1)) => bounds.0[*i] = Some(bounds.0[*i].map_or(-ineq.d, |l| l.max(-ineq.d))),
                _ => branches.push(ineq),
            }
            Node { id: 0, depth: node.depth + 1, bound: node.bound, bounds, branches, cuts: cuts.clone() }
        };
        Ok((child(left), child(right)))
    }
}

/// Split for an integral `x̂` that is not yet fathomed: halve the widest
/// free coordinate around `x̂_i`.
fn box_split(nl: &NodeLift, full: &SdpSolution) -> Branch {
    let mut best: Option<(i64, usize)> = None;
    for (a, &i) in nl.free.iter().enumerate() {
        let width = match (nl.lo[i], nl.hi[i]) {
            (Some(l), Some(h)) => h - l,
            _ => i64::MAX,
        };
        if best.is_none_or(|b| width > b.0) {
            best = Some((width, a));
        }
    }
    let (_, a) = best.expect("a node lift has a free variable");
    let i = nl.free[a];
    let mut d = full.x[i].round() as i64;
    if let (Some(l), Some(h)) = (nl.lo[i], nl.hi[i]) {
        d = d.clamp(l, h - 1);
    }
    let mut c = vec![0; nl.free.len()];
    c[a] = 1;
    Branch { ineq: LinearIneq { c, d }, removed: None }
}

struct Queued(Node, NodeSelection);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    /// Max-heap order: the node to explore next compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.1 {
            NodeSelection::BestBound => {
                other.0.bound.total_cmp(&self.0.bound).then_with(|| other.0.id.cmp(&self.0.id))
            }
            NodeSelection::Dfs => self.0.depth.cmp(&other.0.depth).then_with(|| other.0.id.cmp(&self.0.id)),
        }
    }
}

fn global_bounds(ctx: &Ctx, base: &Bounds, f_star: f64) -> Bounds {
    if f_star.is_finite() {
        if let Some(level) = level_set_box(ctx.problem, f_star) {
            return intersect(base, &level);
        }
    }
    base.clone()
}

/// Global minimization of a pure integer problem.
pub fn branch_and_cut(problem: &QcqpProblem, config: &BncConfig) -> Result<BncResult> {
    config.validate()?;
    if !problem.is_pure_integer() {
        return Err(Error::InvalidProblem("branch-and-cut needs every variable integer".into()));
    }
    let n = problem.n();
    let ctx = Ctx { problem, normalized: problem.normalize_equalities(), config };

    let mut base = implied_box(problem);
    if let Some(b) = &config.bounds {
        if b.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.dim() });
        }
        let explicit = (b.lo.iter().map(|&v| Some(v)).collect(), b.hi.iter().map(|&v| Some(v)).collect());
        base = intersect(&base, &explicit);
    }

    let mut f_star = f64::INFINITY;
    let mut x_star: Option<Vec<i64>> = None;
    if let Some(x0) = &config.initial_incumbent {
        let (x, f) = incumbent_at(problem, x0.clone(), 1e-9)
            .ok_or_else(|| Error::InvalidArgument("initial incumbent is infeasible".into()))?;
        f_star = f;
        x_star = Some(x);
    }
    let mut global = global_bounds(&ctx, &base, f_star);

    let pool = if config.threads > 1 {
        Some(rayon::ThreadPoolBuilder::new().num_threads(config.threads).build().map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };

    let mut queue = BinaryHeap::new();
    let root = Node { id: 0, depth: 0, bound: f64::NEG_INFINITY, bounds: (vec![None; n], vec![None; n]), branches: vec![], cuts: vec![] };
    queue.push(Queued(root, config.node_selection));
    let mut next_id = 1;
    let mut nodes = 0;
    let mut closed = f64::INFINITY;
    let mut root_bound = f64::NEG_INFINITY;
    let mut max_depth = 0;
    let mut log_lines = Vec::new();
    let mut limit_hit = false;

    while !queue.is_empty() {
        let mut batch = Vec::new();
        while batch.len() < config.threads {
            let Some(Queued(node, _)) = queue.pop() else { break };
            if config.fathoms(node.bound, f_star) {
                closed = closed.min(node.bound);
                continue;
            }
            if nodes + batch.len() >= config.max_nodes {
                queue.push(Queued(node, config.node_selection));
                limit_hit = true;
                break;
            }
            batch.push(node);
        }
        if batch.is_empty() {
            if limit_hit {
                break;
            }
            continue;
        }
        let results: Vec<Result<Evaluated>> = match &pool {
            Some(pool) => pool.install(|| batch.into_par_iter().map(|nd| ctx.evaluate(nd, &global, f_star)).collect()),
            None => batch.into_iter().map(|nd| ctx.evaluate(nd, &global, f_star)).collect(),
        };
        for res in results {
            let ev = res?;
            nodes += 1;
            max_depth = max_depth.max(ev.depth);
            if ev.node_id == 0 {
                root_bound = ev.bound;
            }
            let mut improved = false;
            for (x, f) in ev.incumbents {
                if f < f_star || (f == f_star && x_star.as_ref().is_some_and(|s| x < *s)) {
                    improved |= f < f_star;
                    f_star = f;
                    x_star = Some(x);
                }
            }
            if improved {
                global = global_bounds(&ctx, &base, f_star);
            }
            match ev.outcome {
                Outcome::Infeasible => {}
                Outcome::Closed(b) => closed = closed.min(b),
                Outcome::Split(b, children) => {
                    let (mut l, mut r) = *children;
                    l.bound = b;
                    r.bound = b;
                    l.id = next_id;
                    r.id = next_id + 1;
                    next_id += 2;
                    // DFS explores the `≤` side first
                    queue.push(Queued(r, config.node_selection));
                    queue.push(Queued(l, config.node_selection));
                }
            }
            let line = format!(
                "node={} depth={} bound={} incumbent={} open={}",
                ev.node_id,
                ev.depth,
                ev.bound,
                f_star,
                queue.len()
            );
            log::info!("{line}");
            log_lines.push(line);
        }
        if limit_hit {
            break;
        }
    }

    let open_min = queue.iter().map(|q| q.0.bound).fold(f64::INFINITY, f64::min);
    let lower_bound = f_star.min(closed).min(open_min);
    let status = if !queue.is_empty() {
        BncStatus::NodeLimit
    } else if x_star.is_some() {
        BncStatus::Optimal
    } else {
        BncStatus::Infeasible
    };
    Ok(BncResult { status, x_star, f_star, nodes, lower_bound, root_bound, max_depth, log: log_lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_ils_instance, maxcut_to_qcqp, random_graph, triangle};
    use crate::model::Sense;
    use crate::oracle::{brute_force, brute_force_maxcut, ils_box};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn concave() -> QcqpProblem {
        let obj = QuadraticForm::new(SymMatrix::identity(2).scaled(-1.0), vec![0.0; 2], 0.0).unwrap();
        let ball = QuadraticForm::new(SymMatrix::identity(2), vec![0.0; 2], -1.2).unwrap();
        QcqpProblem::new(2, obj).unwrap().with(ball, Sense::Leq).unwrap()
    }

    fn ils_1d() -> QcqpProblem {
        QcqpProblem::new(1, QuadraticForm::from_row_major(1, &[1.0], vec![-0.8], 0.16).unwrap()).unwrap()
    }

    fn fake_solution(lift: &LiftedSdp, x: Vec<f64>, duals: Vec<f64>) -> SdpSolution {
        let n = x.len();
        let mut big_x = SymMatrix::outer(&x);
        for i in 0..n {
            big_x.set(i, i, big_x.get(i, i) + 0.1);
        }
        SdpSolution {
            status: SdpStatus::Optimal,
            big_x,
            x,
            f_sdp: 0.0,
            duals,
            tags: lift.constraints().iter().map(|c| c.tag).collect(),
            dual_objective: 0.0,
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
        }
    }

    fn two_cut_lift() -> LiftedSdp {
        let obj = QuadraticForm::new(SymMatrix::identity(2), vec![0.0; 2], 0.0).unwrap();
        let p = QcqpProblem::new(2, obj).unwrap();
        let cuts = [Cut::new(vec![1, 1], 0).unwrap(), Cut::new(vec![1, 0], 0).unwrap()];
        crate::model::lift(&p, &cuts).unwrap()
    }

    #[test]
    fn dual_cut_branch_picks_largest_multiplier() {
        let lift = two_cut_lift();
        let sol = fake_solution(&lift, vec![0.3, 0.4], vec![0.5, 2.0]);
        let b = select_branching(&sol, &lift, &BncConfig::default()).unwrap();
        assert_eq!(b.ineq, LinearIneq { c: vec![1, 0], d: 0 });
        assert_eq!(b.removed, Some(Provenance::Cut(1)));
    }

    #[test]
    fn dual_cut_branch_ties_go_to_smallest_a() {
        let lift = two_cut_lift();
        let sol = fake_solution(&lift, vec![0.3, 0.4], vec![1.0, 1.0]);
        let b = select_branching(&sol, &lift, &BncConfig::default()).unwrap();
        assert_eq!(b.ineq.c, vec![1, 0]);
    }

    #[test]
    fn dual_cut_branch_skips_cuts_that_keep_the_point() {
        let lift = two_cut_lift();
        // aᵀx̂ = 1.2 for a = (1, 1) is outside (0, 1); a = (1, 0) has no multiplier
        let sol = fake_solution(&lift, vec![0.8, 0.4], vec![3.0, 0.0]);
        let b = select_branching(&sol, &lift, &BncConfig::default()).unwrap();
        assert_eq!(b.removed, None);
        assert_eq!(b.ineq, LinearIneq { c: vec![0, 1], d: 0 });
    }

    #[test]
    fn most_fractional_branch() {
        let lift = two_cut_lift();
        let sol = fake_solution(&lift, vec![1.45, -0.2], vec![5.0, 5.0]);
        let config = BncConfig { branching: Branching::MostFractional, ..BncConfig::default() };
        let b = select_branching(&sol, &lift, &config).unwrap();
        assert_eq!(b.ineq, LinearIneq { c: vec![1, 0], d: 1 });
    }

    #[test]
    fn integral_point_has_no_branch() {
        let lift = two_cut_lift();
        let sol = fake_solution(&lift, vec![1.0, -2.0], vec![0.0, 0.0]);
        assert!(matches!(select_branching(&sol, &lift, &BncConfig::default()), Err(Error::NoBranch)));
    }

    #[test]
    fn branching_rejects_misaligned_duals() {
        let lift = two_cut_lift();
        let sol = fake_solution(&lift, vec![0.5, 0.5], vec![1.0]);
        assert!(select_branching(&sol, &lift, &BncConfig::default()).is_err());
    }

    #[test]
    fn incumbent_from_rounding() {
        let p = concave();
        let lift = crate::model::lift(&p, &[]).unwrap();
        let sol = fake_solution(&lift, vec![0.9, 0.1], vec![0.0]);
        assert_eq!(try_incumbent(&sol, &p, 1e-9), Some((vec![1, 0], -1.0)));
        let sol = fake_solution(&lift, vec![0.9, 0.8], vec![0.0]);
        assert_eq!(try_incumbent(&sol, &p, 1e-9), None);
    }

    #[test]
    fn implied_box_of_a_ball() {
        let (lo, hi) = implied_box(&concave());
        assert_eq!(lo, vec![Some(-1), Some(-1)]);
        assert_eq!(hi, vec![Some(1), Some(1)]);
    }

    #[test]
    fn implied_box_of_univariate_rows() {
        // x0² − x0 = 0 and 2 x1 − 5 ≤ 0
        let obj = QuadraticForm::constant(2, 0.0);
        let bin = QuadraticForm::from_row_major(2, &[1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0], 0.0).unwrap();
        let lin = QuadraticForm::linear(vec![0.0, 2.0], -5.0);
        let p = QcqpProblem::new(2, obj).unwrap().with(bin, Sense::Eq).unwrap().with(lin, Sense::Leq).unwrap();
        let (lo, hi) = implied_box(&p);
        assert_eq!(lo, vec![Some(0), None]);
        assert_eq!(hi, vec![Some(1), Some(2)]);
    }

    #[test]
    fn level_set_box_of_ils() {
        let (lo, hi) = level_set_box(&ils_1d(), 0.16).unwrap();
        assert_eq!((lo[0], hi[0]), (Some(0), Some(0)));
        assert!(level_set_box(&concave(), 0.0).is_none());
    }

    #[test]
    fn triangle_max_cut() {
        let res = branch_and_cut(&maxcut_to_qcqp(&triangle()).unwrap(), &BncConfig::default()).unwrap();
        assert_eq!(res.status, BncStatus::Optimal);
        assert_abs_diff_eq!(res.f_star, -2.0, epsilon = 1e-9);
        assert!(res.lower_bound <= res.f_star + 1e-9);
        assert!(res.log[0].starts_with("node=0 depth=0 bound="));
    }

    #[test]
    fn one_dimensional_ils() {
        let res = branch_and_cut(&ils_1d(), &BncConfig::default()).unwrap();
        assert_eq!(res.status, BncStatus::Optimal);
        assert_eq!(res.x_star, Some(vec![0]));
        assert_abs_diff_eq!(res.f_star, 0.16, epsilon = 1e-12);
    }

    #[test]
    fn concave_in_a_box() {
        let config = BncConfig { bounds: Some(IntBox::symmetric(2, 2)), ..BncConfig::default() };
        let res = branch_and_cut(&concave(), &config).unwrap();
        assert_eq!(res.status, BncStatus::Optimal);
        assert_abs_diff_eq!(res.f_star, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.root_bound, -1.2, epsilon = 1e-5);
    }

    #[test]
    fn infeasible_problem() {
        // x² ≤ 0.25 and x ≥ 0.3 hold for no integer x
        let obj = QuadraticForm::from_row_major(1, &[1.0], vec![0.0], 0.0).unwrap();
        let ball = QuadraticForm::from_row_major(1, &[1.0], vec![0.0], -0.25).unwrap();
        let lin = QuadraticForm::linear(vec![-1.0], 0.3);
        let p = QcqpProblem::new(1, obj).unwrap().with(ball, Sense::Leq).unwrap().with(lin, Sense::Leq).unwrap();
        let res = branch_and_cut(&p, &BncConfig::default()).unwrap();
        assert_eq!(res.status, BncStatus::Infeasible);
        assert!(res.x_star.is_none());
        assert!(res.f_star.is_infinite());
    }

    #[test]
    fn unbounded_relaxation_is_an_error() {
        let obj = QuadraticForm::linear(vec![1.0], 0.0);
        let p = QcqpProblem::new(1, obj).unwrap();
        let config = BncConfig { heuristic_samples: 0, ..BncConfig::default() };
        assert!(branch_and_cut(&p, &config).is_err());
    }

    #[test]
    fn rejects_continuous_variables() {
        let obj = QuadraticForm::from_row_major(2, &[1.0, 0.0, 0.0, 1.0], vec![0.0; 2], 0.0).unwrap();
        let p = QcqpProblem::new(1, obj).unwrap();
        assert!(branch_and_cut(&p, &BncConfig::default()).is_err());
    }

    #[test]
    fn node_limit_keeps_a_valid_lower_bound() {
        let inst = gen_ils_instance(5, 3).unwrap();
        let p = inst.problem();
        let config = BncConfig { max_nodes: 1, ..BncConfig::default() };
        let res = branch_and_cut(&p, &config).unwrap();
        let bx = ils_box(&inst.a, &inst.x_cts).unwrap();
        let exact = brute_force(&p, &bx).unwrap().f_star;
        assert!(res.nodes <= 1);
        assert!(res.lower_bound <= exact + 1e-6);
        if res.status == BncStatus::NodeLimit {
            assert!(res.f_star >= exact - 1e-9);
        }
    }

    #[test]
    fn ils_matches_brute_force_under_every_rule() {
        for seed in 0..4 {
            let inst = gen_ils_instance(3, seed).unwrap();
            let p = inst.problem();
            let bx = ils_box(&inst.a, &inst.x_cts).unwrap();
            let exact = brute_force(&p, &bx).unwrap().f_star;
            for (sel, br, threads) in [
                (NodeSelection::BestBound, Branching::DualCut, 1),
                (NodeSelection::Dfs, Branching::MostFractional, 1),
                (NodeSelection::BestBound, Branching::MostFractional, 3),
            ] {
                let config = BncConfig {
                    node_selection: sel,
                    branching: br,
                    threads,
                    heuristic_samples: 0,
                    seed,
                    ..BncConfig::default()
                };
                let res = branch_and_cut(&p, &config).unwrap();
                assert_eq!(res.status, BncStatus::Optimal);
                assert_abs_diff_eq!(res.f_star, exact, epsilon = 1e-6 * (1.0 + exact.abs()));
            }
        }
    }

    #[test]
    fn max_cut_matches_brute_force() {
        for seed in 0..3 {
            let w = random_graph(7, 0.6, seed);
            let (best, _) = brute_force_maxcut(&w).unwrap();
            let res = branch_and_cut(&maxcut_to_qcqp(&w).unwrap(), &BncConfig::default()).unwrap();
            assert_eq!(res.status, BncStatus::Optimal);
            assert_abs_diff_eq!(-res.f_star, best, epsilon = 1e-6);
        }
    }

    #[test]
    fn initial_incumbent_is_checked() {
        let config = BncConfig { initial_incumbent: Some(vec![1, 1]), ..BncConfig::default() };
        assert!(branch_and_cut(&concave(), &config).is_err());
        let config = BncConfig { initial_incumbent: Some(vec![0, -1]), ..BncConfig::default() };
        let res = branch_and_cut(&concave(), &config).unwrap();
        assert_abs_diff_eq!(res.f_star, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(BncConfig { threads: 0, ..BncConfig::default() }.validate().is_err());
        assert!(BncConfig { max_nodes: 0, ..BncConfig::default() }.validate().is_err());
        assert!(BncConfig { int_tol: 0.5, ..BncConfig::default() }.validate().is_err());
        assert_eq!("dual".parse::<Branching>().unwrap(), Branching::DualCut);
        assert!("x".parse::<Branching>().is_err());
    }

    proptest! {
        #[test]
        fn children_partition_the_lattice(
            c in proptest::collection::vec(-3i64..=3, 1..6),
            d in -5i64..5,
            x in proptest::collection::vec(-4i64..=4, 6),
        ) {
            let left = LinearIneq { c: c.clone(), d };
            let right = left.complement();
            let xf: Vec<f64> = x[..c.len()].iter().map(|&v| v as f64).collect();
            prop_assert!(left.holds(&xf, 0.0) ^ right.holds(&xf, 0.0));
            // the cut made redundant by the branch holds on both sides
            if c.iter().any(|&v| v != 0) {
                let cut = Cut::new(c.clone(), d).unwrap();
                prop_assert!(cut.product_int(&x[..c.len()]) >= 0);
            }
        }
    }
}
