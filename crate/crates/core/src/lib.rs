//! Lower bounds and global solutions for mixed-integer nonconvex QCQPs.
//!
//! The relaxation lifts `xxᵀ` to a matrix `X` with `[[X, x], [xᵀ, 1]] ⪰ 0`
//! and is tightened by concave quadratic cuts `(aᵀx − b)(aᵀx − b − 1) ≥ 0`,
//! which hold at every integer point. Bounds are reported together with a
//! dual certificate that can be checked independently of the solver.
//!
//! ```
//! use miqcqp::{lift, sdp, QcqpProblem, QuadraticForm, Sense, SymMatrix};
//!
//! // min −‖x‖² subject to ‖x‖² ≤ 1.2 over x ∈ Z²
//! let obj = QuadraticForm::new(SymMatrix::identity(2).scaled(-1.0), vec![0.0; 2], 0.0).unwrap();
//! let ball = QuadraticForm::new(SymMatrix::identity(2), vec![0.0; 2], -1.2).unwrap();
//! let problem = QcqpProblem::new(2, obj).unwrap().with(ball, Sense::Leq).unwrap();
//! let sol = sdp::solve(&lift(&problem, &[]).unwrap(), &Default::default()).unwrap();
//! assert!((sol.f_sdp + 1.2).abs() < 1e-6);
//! ```

pub mod error;
pub mod instances;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod rounding;
pub mod sdp;
pub mod certificate;
pub mod cuts;
pub mod cutloop;
pub mod bnc;

pub use bnc::{branch_and_cut, BncConfig, BncResult, BncStatus};
pub use cuts::{Cut, EigCut, ScoredCut};
pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use model::{lift, Constraint, LiftedSdp, LinearIneq, Provenance, QcqpProblem, QuadraticForm, Sense};
pub use sdp::{SdpSolution, SdpStatus, SolverSettings};
