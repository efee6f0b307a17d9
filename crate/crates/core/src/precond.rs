//! Preconditioners `w = T r` with `T ≈ (A − σM)⁻¹` and their quality metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{cholesky, generalized_eigen, DenseMatrix};
use crate::error::{Error, Result};
use crate::linops::{CsrMatrix, HermitianOperator, HermitianPencil};
use crate::scalar::{sqrt, Scalar};

/// Largest dimension for which dense metrics are computed.
pub const DENSE_CAP: usize = 512;

/// Diagonal scaling applied once after a negative pivot.
pub const BREAKDOWN_DIAG_SCALE: f64 = 1.0 + 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecondKind {
    Identity,
    Jacobi,
    Ichol { droptol: f64 },
    DenseShiftedInverse { sigma: f64 },
    User,
}

/// Lower-triangular factor in compressed columns with a separate real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<S> {
    n: usize,
    diag: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<S>,
    /// The diagonal was scaled after a first breakdown.
    pub stabilized: bool,
}

impl<S: Scalar> CholeskyFactor<S> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Strictly lower entries plus diagonal.
    pub fn nnz(&self) -> usize {
        self.values.len() + self.n
    }

    /// Solves `L L* z = r` in place.
    pub fn solve_in_place(&self, z: &mut [S]) {
        for j in 0..self.n {
            let yj = z[j].scale(1.0 / self.diag[j]);
            z[j] = yj;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                z[i] -= self.values[k] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let mut acc = z[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc -= self.values[k].conj() * z[self.row_idx[k]];
            }
            z[j] = acc.scale(1.0 / self.diag[j]);
        }
    }

    /// `L` as a dense matrix (tests and small problems).
    pub fn to_dense(&self) -> DenseMatrix<S> {
        let mut l = DenseMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            l[(j, j)] = S::from_real(self.diag[j]);
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                l[(self.row_idx[k], j)] = self.values[k];
            }
        }
        l
    }
}

/// Left-looking incomplete Cholesky with threshold dropping of a Hermitian
/// sparse matrix. Entries of column `j` below `droptol·‖A(:,j)‖₂` are
/// dropped; `droptol = 0` gives the exact factor.
pub fn ichol_factor<S: Scalar>(a: &CsrMatrix<S>, droptol: f64, diag_scale: f64) -> Result<CholeskyFactor<S>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput("factorization of a non-square matrix".into()));
    }
    if !(droptol >= 0.0) || !droptol.is_finite() {
        return Err(Error::InvalidInput("droptol must be finite and non-negative".into()));
    }
    let n = a.nrows();
    let mut diag = vec![0.0; n];
    // Columns of L below the diagonal, each sorted by row.
    let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    // rows[j]: columns k < j with l_jk != 0, with the position of row j in column k.
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut acc = vec![S::zero(); n];
    let mut mark = vec![usize::MAX; n];
    let mut touched: Vec<usize> = Vec::new();

    for j in 0..n {
        touched.clear();
        let (rc, rv) = a.row(j);
        let mut col_norm2 = 0.0;
        let mut ajj = 0.0;
        for (&c, &v) in rc.iter().zip(rv) {
            col_norm2 += v.abs_sqr();
            if c == j {
                ajj = v.re() * diag_scale;
            } else if c > j {
                // a_cj = conj(a_jc)
                acc[c] = v.conj();
                mark[c] = j;
                touched.push(c);
            }
        }
        let mut d = ajj;
        for &(k, pos) in &rows[j] {
            let col = &cols[k];
            let ljk = col[pos].1;
            d -= ljk.abs_sqr();
            for &(i, lik) in &col[pos + 1..] {
                if mark[i] != j {
                    mark[i] = j;
                    acc[i] = S::zero();
                    touched.push(i);
                }
                acc[i] -= lik * ljk.conj();
            }
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::FactorBreakdown { index: j, pivot: d });
        }
        let ljj = sqrt(d);
        diag[j] = ljj;
        let thresh = droptol * sqrt(col_norm2);
        touched.sort_unstable();
        let mut col = Vec::with_capacity(touched.len());
        for &i in &touched {
            let v = acc[i].scale(1.0 / ljj);
            if v != S::zero() && !(v.abs() < thresh) {
                col.push((i, v));
            }
        }
        for (pos, &(i, _)) in col.iter().enumerate() {
            rows[i].push((j, pos));
        }
        cols[j] = col;
    }

    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for col in cols {
        for (i, v) in col {
            row_idx.push(i);
            values.push(v);
        }
        col_ptr.push(row_idx.len());
    }
    Ok(CholeskyFactor { n, diag, col_ptr, row_idx, values, stabilized: diag_scale != 1.0 })
}

/// Incomplete factorization with the breakdown policy: on a non-positive
/// pivot retry once with the diagonal scaled by `1 + 1e-3`, then fail.
pub fn ichol_with_retry<S: Scalar>(a: &CsrMatrix<S>, droptol: f64) -> Result<CholeskyFactor<S>> {
    match ichol_factor(a, droptol, 1.0) {
        Err(Error::FactorBreakdown { .. }) if droptol > 0.0 => ichol_factor(a, droptol, BREAKDOWN_DIAG_SCALE),
        r => r,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Apply<S> {
    Identity,
    Diagonal(Vec<f64>),
    Factor(CholeskyFactor<S>),
    Dense(DenseMatrix<S>),
}

/// A Hermitian positive definite preconditioner.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner<S> {
    kind: PrecondKind,
    n: usize,
    imp: Apply<S>,
}

impl<S: Scalar> Preconditioner<S> {
    pub fn identity(n: usize) -> Self {
        Self { kind: PrecondKind::Identity, n, imp: Apply::Identity }
    }

    /// User-supplied dense Hermitian positive definite `T`.
    pub fn from_dense(t: DenseMatrix<S>) -> Result<Self> {
        let op = HermitianOperator::from_dense(t)?;
        let HermitianOperator::Dense(t) = op else { unreachable!() };
        cholesky(&t, 0.0).map_err(|_| Error::NotPositiveDefinite {
            what: "preconditioner",
            detail: "Cholesky factorization failed".into(),
        })?;
        Ok(Self { kind: PrecondKind::User, n: t.rows(), imp: Apply::Dense(t) })
    }

    #[inline]
    pub fn kind(&self) -> PrecondKind {
        self.kind
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// The factor behind an incomplete-Cholesky or shifted-inverse preconditioner.
    pub fn factor(&self) -> Option<&CholeskyFactor<S>> {
        match &self.imp {
            Apply::Factor(f) => Some(f),
            _ => None,
        }
    }

    pub fn apply_into(&self, r: &[S], out: &mut [S]) {
        match &self.imp {
            Apply::Identity => out.copy_from_slice(r),
            Apply::Diagonal(d) => {
                for ((o, ri), di) in out.iter_mut().zip(r).zip(d) {
                    *o = ri.scale(*di);
                }
            }
            Apply::Factor(f) => {
                out.copy_from_slice(r);
                f.solve_in_place(out);
            }
            Apply::Dense(t) => t.mul_vec_into(r, out),
        }
    }

    pub fn apply(&self, r: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.n];
        self.apply_into(r, &mut out);
        out
    }

    /// Dense `T` from `n` applications to unit vectors, hermitized.
    pub fn to_dense(&self) -> DenseMatrix<S> {
        let n = self.n;
        let mut t = DenseMatrix::zeros(n, n);
        let mut e = vec![S::zero(); n];
        let mut col = vec![S::zero(); n];
        for j in 0..n {
            e[j] = S::one();
            self.apply_into(&e, &mut col);
            t.set_col(j, &col);
            e[j] = S::zero();
        }
        t.hermitize();
        t
    }
}

/// `T = diag(1/a_ii)`.
pub fn jacobi_preconditioner<S: Scalar>(a: &HermitianOperator<S>) -> Result<Preconditioner<S>> {
    let d = a.diagonal();
    let mut inv = Vec::with_capacity(d.len());
    for (i, v) in d.iter().enumerate() {
        let x = v.re();
        if !(x > 0.0) {
            return Err(Error::NotPositiveDefinite { what: "diagonal", detail: alloc::format!("entry {i} is {x:e}") });
        }
        inv.push(1.0 / x);
    }
    Ok(Preconditioner { kind: PrecondKind::Jacobi, n: d.len(), imp: Apply::Diagonal(inv) })
}

/// Incomplete Cholesky of `A − σM`, applied as `T = (LL*)⁻¹`.
pub fn incomplete_cholesky<S: Scalar>(
    pencil: &HermitianPencil<S>,
    droptol: f64,
    sigma: f64,
) -> Result<Preconditioner<S>> {
    let shifted = pencil.shifted(sigma)?.to_csr();
    let f = ichol_with_retry(&shifted, droptol)?;
    Ok(Preconditioner { kind: PrecondKind::Ichol { droptol }, n: pencil.dim(), imp: Apply::Factor(f) })
}

/// `T = (A − σM)⁻¹` through an exact sparse Cholesky factor.
pub fn shifted_inverse<S: Scalar>(pencil: &HermitianPencil<S>, sigma: f64) -> Result<Preconditioner<S>> {
    let shifted = pencil.shifted(sigma)?.to_csr();
    let f = ichol_factor(&shifted, 0.0, 1.0).map_err(|e| match e {
        Error::FactorBreakdown { index, pivot } => {
            Error::NotPositiveDefinite { what: "A - sigma M", detail: alloc::format!("pivot {index} is {pivot:e}") }
        }
        e => e,
    })?;
    Ok(Preconditioner { kind: PrecondKind::DenseShiftedInverse { sigma }, n: pencil.dim(), imp: Apply::Factor(f) })
}

/// Quality of a preconditioner for a pencil and shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondQuality {
    pub sigma: f64,
    /// `α_n / α_1` of the pencil `(A − σM, T⁻¹)`.
    pub kappa: f64,
    pub eta: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Smallest eigenvalue of `(M, T⁻¹)`.
    pub mu1: f64,
    pub alpha1: f64,
    pub alpha_n: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
}

/// `η = κ(λ_n−λ₁)(λ₂−σ)/((λ₂−λ₁)(λ_n−σ))`; infinite when `λ₂ = λ₁`.
pub fn eta_from(kappa: f64, lambda1: f64, lambda2: f64, lambda_n: f64, sigma: f64) -> f64 {
    if lambda2 == lambda1 {
        return f64::INFINITY;
    }
    kappa * (lambda_n - lambda1) * (lambda2 - sigma) / ((lambda2 - lambda1) * (lambda_n - sigma))
}

/// Smallest and largest eigenvalues of `(B, T⁻¹)`, computed as `(T B T, T)`.
fn extreme_eigs_with_inverse<S: Scalar>(b: &DenseMatrix<S>, t: &DenseMatrix<S>) -> Result<(f64, f64)> {
    let mut tbt = t.matmul(b).matmul(t);
    tbt.hermitize();
    let e = generalized_eigen(&tbt, t, false)?;
    Ok((e.values[0], *e.values.last().unwrap()))
}

/// Dense-oracle quality metrics; `n` must not exceed [`DENSE_CAP`].
pub fn quality_metrics<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    sigma: f64,
) -> Result<PrecondQuality> {
    let n = pencil.dim();
    if n > DENSE_CAP {
        return Err(Error::Unsupported(alloc::format!("dense metrics need n <= {DENSE_CAP}, got {n}")));
    }
    if t.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: t.dim() });
    }
    if n < 2 {
        return Err(Error::InvalidInput("metrics need n >= 2".into()));
    }
    let a = pencil.a().to_dense();
    let m = pencil.m().to_dense();
    let spec = generalized_eigen(&a, &m, false)?.values;
    let (lambda1, lambda2, lambda_n) = (spec[0], spec[1], spec[n - 1]);
    if !(sigma < lambda1) {
        return Err(Error::InvalidShift { sigma, lambda1 });
    }
    let td = t.to_dense();
    let a_sigma = a.add(&m, S::from_real(-sigma));
    let (alpha1, alpha_n) = extreme_eigs_with_inverse(&a_sigma, &td)?;
    let (mu1, _) = extreme_eigs_with_inverse(&m, &td)?;
    let kappa = alpha_n / alpha1;
    let psi = |l: f64| (l - lambda1) / (l - sigma);
    Ok(PrecondQuality {
        sigma,
        kappa,
        eta: eta_from(kappa, lambda1, lambda2, lambda_n, sigma),
        beta_min: alpha1 * psi(lambda2),
        beta_max: alpha_n * psi(lambda_n),
        mu1,
        alpha1,
        alpha_n,
        lambda1,
        lambda2,
        lambda_n,
    })
}

/// Exact Cholesky check of positive definiteness for a sparse Hermitian matrix.
pub fn is_positive_definite<S: Scalar>(a: &HermitianOperator<S>) -> bool {
    ichol_factor(&a.to_csr(), 0.0, 1.0).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::CsrMatrix;

    fn laplace1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn jacobi_examples() {
        let a = HermitianOperator::<f64>::from_real_diagonal(&[2.0, 4.0]).unwrap();
        let t = jacobi_preconditioner(&a).unwrap();
        assert_eq!(t.apply(&[1.0, 1.0]), vec![0.5, 0.25]);
        let t = jacobi_preconditioner(&HermitianOperator::<f64>::identity(3)).unwrap();
        assert_eq!(t.apply(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let bad = HermitianOperator::<f64>::from_real_diagonal(&[1.0, 0.0]).unwrap();
        assert!(jacobi_preconditioner(&bad).is_err());
    }

    #[test]
    fn exact_factor_inverts() {
        let a = laplace1d(6);
        let f = ichol_factor(&a, 0.0, 1.0).unwrap();
        let mut z = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let r = z.clone();
        f.solve_in_place(&mut z);
        let mut back = vec![0.0; 6];
        a.mul_vec_into(&z, &mut back);
        for (x, y) in back.iter().zip(&r) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_ichol_is_jacobi() {
        let a = CsrMatrix::from_diagonal(&[2.0, 5.0, 0.5]);
        let f = ichol_factor(&a, 0.3, 1.0).unwrap();
        let mut z = vec![1.0, 1.0, 1.0];
        f.solve_in_place(&mut z);
        assert!((z[0] - 0.5).abs() < 1e-15 && (z[1] - 0.2).abs() < 1e-15 && (z[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_breaks_down() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(ichol_with_retry(&a, 0.1), Err(Error::FactorBreakdown { index: 1, .. })));
    }

    #[test]
    fn metrics_diag_example() {
        let a = HermitianOperator::<f64>::from_real_diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let p = HermitianPencil::standard(a);
        let q = quality_metrics(&p, &Preconditioner::identity(3), 0.0).unwrap();
        assert!((q.kappa - 4.0).abs() < 1e-12);
        assert!((q.eta - 6.0).abs() < 1e-12);
        assert!(q.beta_min <= q.beta_max);
        assert!((q.mu1 - 1.0).abs() < 1e-12);
        assert!(matches!(quality_metrics(&p, &Preconditioner::identity(3), 1.0), Err(Error::InvalidShift { .. })));
    }

    #[test]
    fn perfect_preconditioner_has_unit_kappa() {
        let p = HermitianPencil::standard(HermitianOperator::from_csr(laplace1d(5)).unwrap());
        let sigma = 0.0;
        let t = shifted_inverse(&p, sigma).unwrap();
        let q = quality_metrics(&p, &t, sigma).unwrap();
        assert!((q.kappa - 1.0).abs() < 1e-10);
        let expect = (q.lambda_n - q.lambda1) * (q.lambda2 - sigma) / ((q.lambda2 - q.lambda1) * (q.lambda_n - sigma));
        assert!((q.eta - expect).abs() < 1e-10 * expect);
    }
}
