//! Interior-point solver for the lifted relaxation.
//!
//! The relaxation is posed over the bordered matrix `Z = [[X, x], [xᵀ, 1]]`:
//!
//! ```text
//!     minimize    Tr(C Z)
//!     subject to  Tr(A_i Z) ≤ 0      (one row per lifted constraint)
//!                 Z[n, n] = 1
//!                 Z ⪰ 0
//! ```
//!
//! where each `A_i` is the bordered matrix `[[P_i, q_i/2], [q_iᵀ/2, r_i]]`.
//! The solver is a primal-dual path-following method (HKM direction,
//! Mehrotra predictor-corrector) with a dense Schur complement. Cut and
//! branching rows are rank-two in bordered form and are kept factored, which
//! keeps the Schur assembly cheap when thousands of cuts are present.

mod ipm;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{LiftedSdp, Provenance};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub rel_gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { rel_gap_tol: 1e-7, feas_tol: 1e-7, max_iters: 200, step_fraction: 0.98 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::InvalidArgument("step_fraction must lie in (0, 1)".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    PrimalInfeasible,
    UnboundedBelow,
}

impl SdpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SdpStatus::Optimal => "OPTIMAL",
            SdpStatus::MaxIters => "MAX_ITERS",
            SdpStatus::PrimalInfeasible => "PRIMAL_INFEASIBLE",
            SdpStatus::UnboundedBelow => "UNBOUNDED_BELOW",
        }
    }

    /// Statuses that carry a usable primal point and dual multipliers.
    pub fn has_solution(&self) -> bool {
        matches!(self, SdpStatus::Optimal | SdpStatus::MaxIters)
    }
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// `X̂`, the lifted second-moment block.
    pub big_x: SymMatrix,
    /// `x̂`.
    pub x: Vec<f64>,
    /// Lifted objective at `(X̂, x̂)`; `−∞` when unbounded, `+∞` when
    /// infeasible.
    pub f_sdp: f64,
    /// Nonnegative multiplier per lifted constraint, in the constraint's own
    /// (unscaled) normalization, aligned with `tags`.
    pub duals: Vec<f64>,
    pub tags: Vec<Provenance>,
    /// Dual objective of the final iterate.
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

impl SdpSolution {
    pub fn dual(&self, tag: Provenance) -> Option<f64> {
        self.tags.iter().position(|&t| t == tag).map(|i| self.duals[i])
    }

    /// `X̂ − x̂x̂ᵀ`.
    pub fn slack_matrix(&self) -> SymMatrix {
        crate::cuts::slack_matrix(&self.big_x, &self.x, self.x.len())
    }

    /// The bordered matrix `[[X̂, x̂], [x̂ᵀ, 1]]`.
    pub fn bordered(&self) -> SymMatrix {
        let n = self.x.len();
        let mut z = SymMatrix::zeros(n + 1);
        for i in 0..n {
            for j in i..n {
                z.set(i, j, self.big_x.get(i, j));
            }
            z.set(i, n, self.x[i]);
        }
        z.set(n, n, 1.0);
        z
    }
}

pub fn solve(sdp: &LiftedSdp, settings: &SolverSettings) -> Result<SdpSolution> {
    settings.validate()?;
    Ok(ipm::solve(sdp, settings))
}

/// Solves the relaxation with constraint `tag` replaced by `F(X, x) ≤ u`.
pub fn resolve_perturbed(
    sdp: &LiftedSdp,
    tag: Provenance,
    u: f64,
    settings: &SolverSettings,
) -> Result<SdpSolution> {
    solve(&sdp.perturbed(tag, u)?, settings)
}
