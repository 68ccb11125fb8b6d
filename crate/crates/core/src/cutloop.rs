//! Iterative tightening: solve the relaxation, separate violated lattice
//! cuts at its solution, add them, and solve again.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::certificate::{certified_bound, DualCertificate};
use crate::cuts::{eig_cut, enumerate_cuts, random_cuts, rank_cuts, Cut, EigCut, ScoredCut};
use crate::error::{Error, Result};
use crate::model::{lift, LiftedSdp, QcqpProblem};
use crate::sdp::{solve, SdpSolution, SdpStatus, SolverSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    EnumK1,
    EnumK2,
    EnumK3,
    Eig,
    Random3,
    Combined,
}

impl Strategy {
    pub const ALL: [Strategy; 6] =
        [Strategy::EnumK1, Strategy::EnumK2, Strategy::EnumK3, Strategy::Eig, Strategy::Random3, Strategy::Combined];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::EnumK1 => "ENUM_K1",
            Strategy::EnumK2 => "ENUM_K2",
            Strategy::EnumK3 => "ENUM_K3",
            Strategy::Eig => "EIG",
            Strategy::Random3 => "RANDOM3",
            Strategy::Combined => "COMBINED",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_uppercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct CutLoopConfig {
    pub strategy: Strategy,
    pub max_rounds: usize,
    /// Cuts added per round; `None` means `4n`.
    pub cuts_per_round: Option<usize>,
    pub eps_viol: f64,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Multiples of `1/max|v_i|` tried by the eigenvector heuristic.
    pub eig_scalings: Vec<f64>,
    pub random_samples: usize,
    /// Start from the fixed cuts `x_i(x_i − 1) ≥ 0` on every integer
    /// coordinate before any separation.
    pub baseline_k1_fixed: bool,
    /// Tolerance for the dual certificate of each round.
    pub cert_tol: f64,
}

impl Default for CutLoopConfig {
    fn default() -> Self {
        CutLoopConfig {
            strategy: Strategy::Combined,
            max_rounds: 10,
            cuts_per_round: None,
            eps_viol: 1e-6,
            seed: 0,
            solver: SolverSettings::default(),
            eig_scalings: vec![1.0, 2.0, 3.0],
            random_samples: 10_000,
            baseline_k1_fixed: false,
            cert_tol: 1e-6,
        }
    }
}

impl CutLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
        }
        if self.cuts_per_round == Some(0) {
            return Err(Error::InvalidArgument("cuts_per_round must be positive".into()));
        }
        if !(self.eps_viol >= 0.0) {
            return Err(Error::InvalidArgument("eps_viol must be nonnegative".into()));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    NoNewCuts,
    MaxRounds,
    NoCutCertified,
    SolverStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub f_sdp: f64,
    /// Cuts added after this round's solve.
    pub cuts_added: usize,
    /// Cuts present in this round's relaxation.
    pub cuts_total: usize,
    pub iterations: usize,
    pub wall_ms: f64,
    pub status: SdpStatus,
    pub certified_bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TightenReport {
    pub rounds: Vec<RoundRecord>,
    pub solution: SdpSolution,
    pub cuts: Vec<Cut>,
    pub lift: LiftedSdp,
    pub certificate: Option<DualCertificate>,
    pub certified_bound: Option<f64>,
    pub stop: StopReason,
}

impl TightenReport {
    pub fn status(&self) -> SdpStatus {
        self.solution.status
    }

    /// Objective of the first relaxation.
    pub fn initial_f_sdp(&self) -> f64 {
        self.rounds[0].f_sdp
    }

    pub fn final_f_sdp(&self) -> f64 {
        self.solution.f_sdp
    }

    /// Whether `f_sdp` never dropped by more than `tol·(1 + |f|)` between
    /// consecutive optimal rounds.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.rounds.windows(2).all(|w| {
            w[0].status != SdpStatus::Optimal
                || w[1].status != SdpStatus::Optimal
                || w[1].f_sdp >= w[0].f_sdp - tol * (1.0 + w[0].f_sdp.abs())
        })
    }
}

/// Cuts violated at `solution` by the chosen family, best first, at most
/// `cap`. `Ok(None)` means the eigenvalue test certified that no lattice cut
/// is violated.
pub fn separate(
    solution: &SdpSolution,
    num_integer: usize,
    strategy: Strategy,
    config: &CutLoopConfig,
    cap: usize,
    round_seed: u64,
) -> Result<Option<Vec<ScoredCut>>> {
    let (big_x, x) = (&solution.big_x, solution.x.as_slice());
    let p = num_integer.min(x.len());
    if p == 0 {
        return Ok(None);
    }
    let eps = config.eps_viol;
    let eig = || eig_cut(big_x, x, p, &config.eig_scalings, 3, eps);
    let random = || random_cuts(big_x, x, p, config.random_samples, 3.min(p), eps, round_seed);
    let cuts = match strategy {
        Strategy::EnumK1 => enumerate_cuts(big_x, x, p, 1, eps, cap),
        Strategy::EnumK2 => enumerate_cuts(big_x, x, p, 2, eps, cap),
        Strategy::EnumK3 => enumerate_cuts(big_x, x, p, 3, eps, cap),
        Strategy::Eig => match eig()? {
            EigCut::NoCutCertified { .. } => return Ok(None),
            EigCut::Cuts(c) => rank_cuts(c, cap),
        },
        Strategy::Random3 => rank_cuts(random()?, cap),
        Strategy::Combined => {
            let eig_cuts = match eig()? {
                EigCut::NoCutCertified { .. } => return Ok(None),
                EigCut::Cuts(c) => c,
            };
            let mut pool = enumerate_cuts(big_x, x, p, 1, eps, usize::MAX);
            pool.extend(enumerate_cuts(big_x, x, p, 2, eps, usize::MAX));
            pool.extend(eig_cuts);
            pool.extend(random()?);
            rank_cuts(pool, cap)
        }
    };
    Ok(Some(cuts))
}

fn fixed_baseline(problem: &QcqpProblem) -> Vec<Cut> {
    (0..problem.num_integer()).map(|i| Cut::unit(problem.n(), i, 0)).collect()
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    mut record: RoundRecord,
    mut rounds: Vec<RoundRecord>,
    start: Instant,
    stop: StopReason,
    cuts: Vec<Cut>,
    cert: Option<(DualCertificate, f64)>,
    solution: SdpSolution,
    lift: LiftedSdp,
    config: &CutLoopConfig,
) -> TightenReport {
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    rounds.push(record);
    let (certificate, certified_bound) = match cert {
        Some((c, b)) => (Some(c), Some(b)),
        None => (None, None),
    };
    let report = TightenReport { rounds, solution, cuts, lift, certificate, certified_bound, stop };
    if !report.is_monotone(2.0 * config.solver.rel_gap_tol) {
        log::warn!("relaxation bound decreased across cut rounds");
    }
    report
}

pub fn tighten(problem: &QcqpProblem, config: &CutLoopConfig) -> Result<TightenReport> {
    tighten_from(problem, &[], config)
}

/// As [`tighten`], starting from the cut pool `initial`.
pub fn tighten_from(problem: &QcqpProblem, initial: &[Cut], config: &CutLoopConfig) -> Result<TightenReport> {
    config.validate()?;
    let problem = problem.normalize_equalities();
    let n = problem.n();
    let cap = config.cuts_per_round.unwrap_or(4 * n.max(1));

    let mut pool: Vec<Cut> = Vec::new();
    let mut seen: HashSet<Cut> = HashSet::new();
    let mut seed_pool = initial.to_vec();
    if config.baseline_k1_fixed {
        seed_pool.extend(fixed_baseline(&problem));
    }
    for c in seed_pool {
        c.check_support(problem.num_integer())?;
        if seen.insert(c.clone()) {
            pool.push(c);
        }
    }

    let mut rounds = Vec::new();
    let mut round = 0;
    loop {
        let start = Instant::now();
        let sdp = lift(&problem, &pool)?;
        let solution = solve(&sdp, &config.solver)?;
        let cert = if solution.status.has_solution() {
            certified_bound(&solution, &sdp, config.cert_tol).ok()
        } else {
            None
        };
        let mut record = RoundRecord {
            round,
            f_sdp: solution.f_sdp,
            cuts_added: 0,
            cuts_total: pool.len(),
            iterations: solution.iterations,
            wall_ms: 0.0,
            status: solution.status,
            certified_bound: cert.as_ref().map(|c| c.1),
        };

        if !solution.status.has_solution() {
            return Ok(assemble(record, rounds, start, StopReason::SolverStatus, pool, cert, solution, sdp, config));
        }
        if round + 1 >= config.max_rounds {
            return Ok(assemble(record, rounds, start, StopReason::MaxRounds, pool, cert, solution, sdp, config));
        }
        let round_seed = config.seed.wrapping_add(round as u64);
        let Some(found) = separate(&solution, problem.num_integer(), config.strategy, config, usize::MAX, round_seed)? else {
            return Ok(assemble(record, rounds, start, StopReason::NoCutCertified, pool, cert, solution, sdp, config));
        };
        let fresh: Vec<Cut> = found.into_iter().map(|s| s.cut).filter(|c| !seen.contains(c)).take(cap).collect();
        if fresh.is_empty() {
            return Ok(assemble(record, rounds, start, StopReason::NoNewCuts, pool, cert, solution, sdp, config));
        }
        record.cuts_added = fresh.len();
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        log::debug!("round {round}: f_sdp {} (+{} cuts)", solution.f_sdp, fresh.len());
        rounds.push(record);
        for c in fresh {
            seen.insert(c.clone());
            pool.push(c);
        }
        round += 1;
    }
}
