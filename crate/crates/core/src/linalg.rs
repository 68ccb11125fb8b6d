//! Dense symmetric linear algebra.
//!
//! Everything here works on [`SymMatrix`], a thin wrapper over a dense
//! `nalgebra` matrix that keeps both triangles equal. The eigen solver is
//! nalgebra's Householder tridiagonalization followed by implicit QR; we only
//! add the ordering and the PSD tests the relaxation code needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense symmetric matrix. Writes go through [`SymMatrix::set`], which
/// updates both `(i, j)` and `(j, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds `(M + Mᵀ) / 2`. Panics if `m` is not square.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "matrix must be square");
        SymMatrix((m + m.transpose()) * 0.5)
    }

    /// Row-major `dim × dim` data, symmetrized.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(Self::from_matrix(&DMatrix::from_row_slice(dim, dim, data)))
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let v = DVector::from_column_slice(v);
        SymMatrix(&v * v.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.0[(i, j)] = value;
        self.0[(j, i)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Frobenius inner product `Tr(self · other)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `vᵀ M v`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        let mut acc = 0.0;
        for j in 0..n {
            if v[j] == 0.0 {
                continue;
            }
            let col: f64 = v.iter().enumerate().map(|(i, vi)| self.0[(i, j)] * vi).sum();
            acc += col * v[j];
        }
        acc
    }

    /// Leading `k × k` principal submatrix.
    pub fn leading(&self, k: usize) -> SymMatrix {
        SymMatrix(self.0.view((0, 0), (k, k)).into_owned())
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix(&self.0 * factor)
    }

    pub fn add_scaled(&mut self, factor: f64, other: &SymMatrix) {
        self.0 += &other.0 * factor;
    }
}

impl std::ops::Neg for SymMatrix {
    type Output = SymMatrix;

    fn neg(self) -> SymMatrix {
        SymMatrix(-self.0)
    }
}

/// Eigenvalues in ascending order together with the matching orthonormal
/// eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let s = f(self.values[k]);
            scaled.column_mut(k).scale_mut(s);
        }
        SymMatrix::from_matrix(&(scaled * self.vectors.transpose()))
    }
}

pub fn sym_eig(m: &SymMatrix) -> Result<SymEigen> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let d = m.dim();
    if d == 0 {
        return Ok(SymEigen { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) });
    }
    let eig = nalgebra::SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue and a unit eigenvector for it.
pub fn min_eigpair(m: &SymMatrix) -> Result<(f64, DVector<f64>)> {
    if m.dim() == 0 {
        return Err(Error::InvalidArgument("empty matrix has no eigenpair".into()));
    }
    let eig = sym_eig(m)?;
    let mut v = eig.vectors.column(0).into_owned();
    let norm = v.norm();
    v /= norm;
    Ok((eig.values[0], v))
}

/// Outcome of [`chol_psd`].
#[derive(Clone, Debug)]
pub enum CholPsd {
    /// `L Lᵀ = M + shift·I`.
    Factor { l: DMatrix<f64>, shift: f64 },
    NotPsd,
}

impl CholPsd {
    pub fn is_psd(&self) -> bool {
        matches!(self, CholPsd::Factor { .. })
    }
}

/// Cholesky-based PSD test. Tries `M` first, then `M + shift_tol·I`.
pub fn chol_psd(m: &SymMatrix, shift_tol: f64) -> CholPsd {
    if !m.is_finite() {
        return CholPsd::NotPsd;
    }
    if let Some(ch) = nalgebra::Cholesky::new(m.0.clone()) {
        return CholPsd::Factor { l: ch.l(), shift: 0.0 };
    }
    if shift_tol > 0.0 {
        let shifted = &m.0 + DMatrix::identity(m.dim(), m.dim()) * shift_tol;
        if let Some(ch) = nalgebra::Cholesky::new(shifted) {
            return CholPsd::Factor { l: ch.l(), shift: shift_tol };
        }
    }
    CholPsd::NotPsd
}

/// Clips negative eigenvalues at zero.
pub fn psd_projection(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0)))
}

/// `F` with `F Fᵀ = M₊`, where `M₊` is the PSD projection of `M`.
/// Columns belonging to eigenvalues below `tol` are dropped.
pub fn psd_factor(m: &SymMatrix, tol: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eig(m)?;
    let d = m.dim();
    let keep: Vec<usize> = (0..d).filter(|&k| eig.values[k] > tol).collect();
    let mut f = DMatrix::zeros(d, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        let s = eig.values[k].sqrt();
        f.set_column(dst, &(eig.vectors.column(k) * s));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        SymMatrix::from_matrix(&m)
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = sym_eig(&SymMatrix::identity(3)).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(eig.values[k], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_eigenpairs() {
        let eig = sym_eig(&SymMatrix::from_diagonal(&[5.0, -2.0])).unwrap();
        assert_abs_diff_eq!(eig.values[0], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.vectors[(1, 0)].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.vectors[(0, 1)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [1, 2, 5, 17, 40] {
            let m = random_sym(d, &mut rng);
            let eig = sym_eig(&m).unwrap();
            let back = eig.reconstruct_with(|l| l);
            let err = (back.as_matrix() - m.as_matrix()).abs().max();
            assert!(err <= 1e-10, "d={d} err={err}");
            let gram = eig.vectors.transpose() * &eig.vectors;
            let orth = (gram - DMatrix::identity(d, d)).abs().max();
            assert!(orth <= 1e-10);
            for k in 1..d {
                assert!(eig.values[k - 1] <= eig.values[k]);
            }
            let residual = (m.as_matrix() * &eig.vectors
                - &eig.vectors * DMatrix::from_diagonal(&eig.values))
                .abs()
                .max();
            assert!(residual <= 1e-10 * (1.0 + m.frobenius_norm()));
        }
    }

    #[test]
    fn trace_and_determinant_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=4 {
            let m = random_sym(d, &mut rng);
            let eig = sym_eig(&m).unwrap();
            let sum: f64 = eig.values.iter().sum();
            assert!((sum - m.trace()).abs() <= 1e-9 * m.frobenius_norm().max(1e-300));
            let prod: f64 = eig.values.iter().product();
            assert_abs_diff_eq!(prod, m.as_matrix().determinant(), epsilon = 1e-10);
        }
    }

    #[test]
    fn min_eigpair_cases() {
        let (l, _) = min_eigpair(&SymMatrix::identity(2).scaled(0.6)).unwrap();
        assert_abs_diff_eq!(l, 0.6, epsilon = 1e-14);

        let (l, v) = min_eigpair(&SymMatrix::from_diagonal(&[0.1, 3.0])).unwrap();
        assert_abs_diff_eq!(l, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(v[0].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-14);

        let u = [1.0, -2.0, 0.5];
        let (l, _) = min_eigpair(&SymMatrix::outer(&u)).unwrap();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = SymMatrix::identity(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(sym_eig(&m), Err(Error::NonFinite)));
        assert!(min_eigpair(&m).is_err());
    }

    #[test]
    fn chol_psd_cases() {
        match chol_psd(&SymMatrix::identity(3), 1e-12) {
            CholPsd::Factor { l, shift } => {
                assert_eq!(shift, 0.0);
                assert!((l - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-15);
            }
            CholPsd::NotPsd => panic!("identity is PSD"),
        }
        assert!(!chol_psd(&SymMatrix::from_diagonal(&[1.0, -1.0]), 1e-9).is_psd());
        // singular PSD needs the shift
        assert!(chol_psd(&SymMatrix::outer(&[1.0, 1.0]), 1e-9).is_psd());
    }

    #[test]
    fn chol_psd_agrees_with_min_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tol = 1e-3;
        for _ in 0..300 {
            let d = rng.gen_range(1..7);
            let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let shift = rng.gen_range(-0.5..0.2);
            let m = SymMatrix::from_matrix(&(&g * g.transpose() * 0.1))
                .into_matrix()
                + DMatrix::identity(d, d) * shift;
            let m = SymMatrix::from_matrix(&m);
            let (lmin, _) = min_eigpair(&m).unwrap();
            if (lmin + tol).abs() < 1e-9 {
                continue;
            }
            assert_eq!(chol_psd(&m, tol).is_psd(), lmin >= -tol, "lmin={lmin}");
        }
    }

    #[test]
    fn psd_factor_reproduces_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_sym(6, &mut rng);
        let f = psd_factor(&m, 0.0).unwrap();
        let p = psd_projection(&m).unwrap();
        assert!((f.clone() * f.transpose() - p.as_matrix()).abs().max() < 1e-10);
    }
}
