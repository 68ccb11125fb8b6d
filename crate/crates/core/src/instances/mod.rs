//! Benchmark instance generators and file formats.
//!
//! Integer least squares instances minimize `‖A(x − x_cts)‖²` over `x ∈ Zⁿ`
//! with `A` a `2n × n` standard Gaussian matrix and `x_cts` uniform on the
//! unit box. Max-cut instances are stored as symmetric weight matrices and
//! converted to a 0-1 minimization.

mod graph;
mod json;

pub use graph::{parse_graph, read_graph, render_graph, write_graph};
pub use json::{parse_problem, read_problem, render_problem, write_problem};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{QcqpProblem, QuadraticForm, Sense};
use crate::rng::{seeded, Gaussian};

/// Raw data of an integer least squares instance.
#[derive(Clone, Debug, PartialEq)]
pub struct IlsInstance {
    /// `2n × n`.
    pub a: DMatrix<f64>,
    pub x_cts: Vec<f64>,
}

impl IlsInstance {
    pub fn n(&self) -> usize {
        self.x_cts.len()
    }

    /// `‖A(x − x_cts)‖²` as `(AᵀA, −2AᵀA x_cts, x_ctsᵀAᵀA x_cts)`, every
    /// variable integer, no constraints.
    pub fn problem(&self) -> QcqpProblem {
        let n = self.n();
        let gram = self.a.transpose() * &self.a;
        let xc = nalgebra::DVector::from_column_slice(&self.x_cts);
        let gx = &gram * &xc;
        let q: Vec<f64> = gx.iter().map(|v| -2.0 * v).collect();
        let r = xc.dot(&gx);
        let objective = QuadraticForm::new(SymMatrix::from_matrix(&gram), q, r)
            .expect("dimensions agree by construction");
        QcqpProblem::new(n, objective).expect("dimensions agree by construction")
    }
}

/// Draws `A` row by row, then `x_cts`, from one ChaCha8 stream.
pub fn gen_ils_instance(n: usize, seed: u64) -> Result<IlsInstance> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let mut gauss = Gaussian::new();
    let rows = 2 * n;
    let mut a = DMatrix::zeros(rows, n);
    for i in 0..rows {
        for j in 0..n {
            a[(i, j)] = gauss.sample(&mut rng);
        }
    }
    let x_cts = (0..n).map(|_| rng.gen::<f64>()).collect();
    Ok(IlsInstance { a, x_cts })
}

pub fn gen_ils(n: usize, seed: u64) -> Result<QcqpProblem> {
    Ok(gen_ils_instance(n, seed)?.problem())
}

/// Max-cut on `W` as the 0-1 program
/// `min −(W1)ᵀz + zᵀWz  s.t.  z_i² − z_i = 0`.
/// The optimal value is minus the maximum cut weight.
pub fn maxcut_to_qcqp(w: &SymMatrix) -> Result<QcqpProblem> {
    let n = w.dim();
    if (0..n).any(|i| w.get(i, i) != 0.0) {
        return Err(Error::InvalidProblem("weight matrix must have a zero diagonal".into()));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite);
    }
    let q: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| w.get(i, j)).sum::<f64>()).collect();
    let mut problem = QcqpProblem::new(n, QuadraticForm::new(w.clone(), q, 0.0)?)?;
    for i in 0..n {
        let mut p = SymMatrix::zeros(n);
        p.set(i, i, 1.0);
        let mut q = vec![0.0; n];
        q[i] = -1.0;
        problem.push(QuadraticForm::new(p, q, 0.0)?, Sense::Eq)?;
    }
    Ok(problem)
}

/// Same as [`maxcut_to_qcqp`] from a dense matrix, rejecting asymmetry.
pub fn maxcut_to_qcqp_dense(w: &DMatrix<f64>) -> Result<QcqpProblem> {
    if w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch { expected: w.nrows(), got: w.ncols() });
    }
    if (0..w.nrows()).any(|i| (0..i).any(|j| w[(i, j)] != w[(j, i)])) {
        return Err(Error::InvalidProblem("weight matrix is not symmetric".into()));
    }
    maxcut_to_qcqp(&SymMatrix::from_matrix(w))
}

/// Cut weight of a ±1 assignment, computed twice: `½Σ_{i<j} W_ij(1 − x_i x_j)`
/// and the 0-1 objective at `z = (x + 1)/2`. Errors unless both agree.
pub fn cut_value_identity_check(w: &SymMatrix, x: &[i64]) -> Result<f64> {
    let n = w.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if x.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::InvalidArgument("assignment entries must be ±1".into()));
    }
    let mut direct = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            direct += 0.5 * w.get(i, j) * (1 - x[i] * x[j]) as f64;
        }
    }
    let z: Vec<f64> = x.iter().map(|&v| (v as f64 + 1.0) / 2.0).collect();
    let via_qcqp = -maxcut_to_qcqp(w)?.objective().evaluate(&z)?;
    if (direct - via_qcqp).abs() > 1e-9 * (1.0 + direct.abs()) {
        return Err(Error::InvalidProblem(format!("cut value mismatch: {direct} vs {via_qcqp}")));
    }
    Ok(direct)
}

/// Each edge present with probability `density`, weight ±1 equiprobable.
pub fn random_graph(n: usize, density: f64, seed: u64) -> SymMatrix {
    let mut rng = seeded(seed);
    let mut w = SymMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < density {
                let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                w.set(i, j, s);
            }
        }
    }
    w
}

pub fn gen_random_graph(n: usize, density: f64, seed: u64) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density {density} outside [0, 1]")));
    }
    Ok(random_graph(n, density, seed))
}

/// Unit-weight triangle.
pub fn triangle() -> SymMatrix {
    let mut w = SymMatrix::zeros(3);
    w.set(0, 1, 1.0);
    w.set(0, 2, 1.0);
    w.set(1, 2, 1.0);
    w
}
