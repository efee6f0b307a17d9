//! Hermitian operators, definite pencils and the quadratic forms built on them.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vecops::{dot, is_zero};

/// Relative tolerance for the structural Hermitian check at construction.
pub const HERMITIAN_TOL: f64 = 1e-13;

/// Compressed sparse rows with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> CsrMatrix<S> {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, S)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, S)> = triplets.into_iter().collect();
        for &(i, j, v) in &t {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidInput(alloc::format!("entry ({i}, {j}) outside a {nrows}x{ncols} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix entries"));
            }
        }
        t.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<S> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Raw constructor; validates the compressed layout.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<S>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || col_idx.len() != values.len() || row_ptr[nrows] != values.len() {
            return Err(Error::InvalidInput("inconsistent CSR arrays".into()));
        }
        for i in 0..nrows {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::InvalidInput("CSR columns must be sorted, unique and in range".into()));
            }
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![S::one(); n])
    }

    pub fn from_diagonal(diag: &[S]) -> Self {
        let n = diag.len();
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: diag.to_vec() }
    }

    pub fn from_dense(d: &DenseMatrix<S>) -> Self {
        let trip = (0..d.rows())
            .flat_map(|i| (0..d.cols()).map(move |j| (i, j)))
            .filter(|&(i, j)| d[(i, j)] != S::zero())
            .map(|(i, j)| (i, j, d[(i, j)]));
        Self::from_triplets(d.rows(), d.cols(), trip).expect("dense entries are in range")
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }
    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[S]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => S::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = S::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<S> {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: S, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch { expected: self.nrows, found: other.nrows });
        }
        let trip = (0..self.nrows).flat_map(|i| {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            c1.iter()
                .zip(v1)
                .map(move |(&j, &v)| (i, j, v))
                .chain(c2.iter().zip(v2).map(move |(&j, &v)| (i, j, alpha * v)))
        });
        Self::from_triplets(self.nrows, self.ncols, trip.collect::<Vec<_>>())
    }

    pub fn scaled(&self, alpha: S) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// First `(row, col)` whose entry differs from the conjugate of its mirror
    /// by more than `tol` times the largest entry.
    pub fn hermitian_violation(&self, tol: f64) -> Option<(usize, usize)> {
        if self.nrows != self.ncols {
            return Some((0, 0));
        }
        let scale = self.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if (v - self.get(j, i).conj()).abs() > tol * scale {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// A Hermitian linear operator with sparse or dense storage.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianOperator<S> {
    Sparse(CsrMatrix<S>),
    Dense(DenseMatrix<S>),
}

impl<S: Scalar> HermitianOperator<S> {
    pub fn from_csr(m: CsrMatrix<S>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput("operator must be square".into()));
        }
        if let Some((row, col)) = m.hermitian_violation(HERMITIAN_TOL) {
            return Err(Error::NotHermitian { row, col });
        }
        Ok(Self::Sparse(m))
    }

    pub fn from_dense(mut m: DenseMatrix<S>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("operator must be square".into()));
        }
        if !m.all_finite() {
            return Err(Error::NonFinite("matrix entries"));
        }
        if m.hermitian_defect() > HERMITIAN_TOL {
            let n = m.rows();
            let scale = m.max_abs();
            for i in 0..n {
                for j in 0..=i {
                    if (m[(i, j)] - m[(j, i)].conj()).abs() > HERMITIAN_TOL * scale {
                        return Err(Error::NotHermitian { row: i, col: j });
                    }
                }
            }
        }
        m.hermitize();
        Ok(Self::Dense(m))
    }

    pub fn identity(n: usize) -> Self {
        Self::Sparse(CsrMatrix::identity(n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        if !diag.iter().all(|d| d.is_finite()) {
            return Err(Error::NonFinite("diagonal"));
        }
        let d: Vec<S> = diag.iter().map(|&x| S::from_real(x)).collect();
        Ok(Self::Sparse(CsrMatrix::from_diagonal(&d)))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        match self {
            Self::Sparse(m) => m.nrows(),
            Self::Dense(m) => m.rows(),
        }
    }

    #[inline]
    pub fn apply_into(&self, x: &[S], y: &mut [S]) {
        match self {
            Self::Sparse(m) => m.mul_vec_into(x, y),
            Self::Dense(m) => m.mul_vec_into(x, y),
        }
    }

    pub fn apply(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<S> {
        match self {
            Self::Sparse(m) => m.diagonal(),
            Self::Dense(m) => (0..m.rows()).map(|i| m[(i, i)]).collect(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<S> {
        match self {
            Self::Sparse(m) => m.to_dense(),
            Self::Dense(m) => m.clone(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix<S> {
        match self {
            Self::Sparse(m) => m.clone(),
            Self::Dense(m) => CsrMatrix::from_dense(m),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Self::Sparse(_))
    }

    /// `self + alpha * other`, sparse when both operands are sparse.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let a = S::from_real(alpha);
        Ok(match (self, other) {
            (Self::Sparse(x), Self::Sparse(y)) => Self::Sparse(x.add_scaled(a, y)?),
            _ => Self::Dense(self.to_dense().add(&other.to_dense(), a)),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let a = S::from_real(alpha);
        match self {
            Self::Sparse(m) => Self::Sparse(m.scaled(a)),
            Self::Dense(m) => Self::Dense(m.scaled(a)),
        }
    }
}

/// The definite pencil `(A, M)` of `A x = λ M x`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPencil<S> {
    a: HermitianOperator<S>,
    m: HermitianOperator<S>,
}

impl<S: Scalar> HermitianPencil<S> {
    /// Validates matching dimensions and a positive real diagonal of `M`.
    pub fn new(a: HermitianOperator<S>, m: HermitianOperator<S>) -> Result<Self> {
        if a.dim() != m.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: m.dim() });
        }
        if let Some((i, d)) = m.diagonal().iter().enumerate().find(|(_, d)| !(d.re() > 0.0)) {
            return Err(Error::NotPositiveDefinite {
                what: "M",
                detail: alloc::format!("diagonal entry {i} is {:e}", d.re()),
            });
        }
        Ok(Self { a, m })
    }

    /// Standard problem `A x = λ x`.
    pub fn standard(a: HermitianOperator<S>) -> Self {
        let n = a.dim();
        Self { a, m: HermitianOperator::identity(n) }
    }

    #[inline]
    pub fn a(&self) -> &HermitianOperator<S> {
        &self.a
    }
    #[inline]
    pub fn m(&self) -> &HermitianOperator<S> {
        &self.m
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `A - sigma M`
    pub fn shifted(&self, sigma: f64) -> Result<HermitianOperator<S>> {
        self.a.add_scaled(-sigma, &self.m)
    }
}

fn check_vector<S: Scalar>(n: usize, x: &[S]) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("vector"));
    }
    if is_zero(x) {
        return Err(Error::InvalidInput("zero vector".to_string()));
    }
    Ok(())
}

/// `λ(x) = x*Ax / x*Mx`.
pub fn rayleigh_quotient<S: Scalar>(pencil: &HermitianPencil<S>, x: &[S]) -> Result<f64> {
    check_vector(pencil.dim(), x)?;
    let ax = pencil.a().apply(x);
    let mx = pencil.m().apply(x);
    Ok(dot(x, &ax).re() / dot(x, &mx).re())
}

/// `A x - θ M x`.
pub fn residual<S: Scalar>(pencil: &HermitianPencil<S>, x: &[S], theta: f64) -> Result<Vec<S>> {
    check_vector(pencil.dim(), x)?;
    let mut r = pencil.a().apply(x);
    let mx = pencil.m().apply(x);
    let t = S::from_real(theta);
    for (ri, mi) in r.iter_mut().zip(&mx) {
        *ri -= t * *mi;
    }
    Ok(r)
}

/// `v* M w`.
pub fn m_inner<S: Scalar>(m: &HermitianOperator<S>, v: &[S], w: &[S]) -> Result<S> {
    let n = m.dim();
    if v.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: if v.len() != n { v.len() } else { w.len() } });
    }
    Ok(dot(v, &m.apply(w)))
}

/// `‖v‖_M`.
pub fn m_norm<S: Scalar>(m: &HermitianOperator<S>, v: &[S]) -> Result<f64> {
    Ok(crate::scalar::sqrt(m_inner(m, v, v)?.re().max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Complex64;

    fn diag(d: &[f64]) -> HermitianOperator<f64> {
        HermitianOperator::from_real_diagonal(d).unwrap()
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let p = HermitianPencil::standard(diag(&[3.0, 5.0]));
        assert_eq!(rayleigh_quotient(&p, &[1.0, 0.0]).unwrap(), 3.0);
        let p = HermitianPencil::new(diag(&[1.0, 2.0]), diag(&[2.0, 1.0])).unwrap();
        assert_eq!(rayleigh_quotient(&p, &[1.0, 1.0]).unwrap(), 1.0);
        let p = HermitianPencil::standard(HermitianOperator::<f64>::identity(3));
        assert!((rayleigh_quotient(&p, &[0.3, -2.0, 7.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(rayleigh_quotient(&p, &[0.0; 3]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn residual_examples() {
        let p = HermitianPencil::standard(diag(&[1.0, 2.0]));
        assert_eq!(residual(&p, &[1.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(residual(&p, &[1.0, 1.0], 1.5).unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn m_inner_examples() {
        let m = HermitianOperator::<f64>::identity(2);
        assert_eq!(m_inner(&m, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let m = diag(&[2.0, 3.0]);
        assert_eq!(m_inner(&m, &[1.0, 1.0], &[1.0, -1.0]).unwrap(), -1.0);
        assert!(matches!(m_inner(&m, &[1.0], &[1.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_non_hermitian_and_non_finite() {
        let c = CsrMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert!(matches!(HermitianOperator::from_csr(c), Err(Error::NotHermitian { .. })));
        assert!(CsrMatrix::from_triplets(1, 1, [(0, 0, f64::NAN)]).is_err());
        let c = Complex64::new;
        let d = DenseMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        assert!(HermitianOperator::from_dense(d).is_err());
    }

    #[test]
    fn pencil_rejects_bad_mass() {
        assert!(HermitianPencil::new(diag(&[1.0, 2.0]), diag(&[1.0, 0.0])).is_err());
        assert!(HermitianPencil::new(diag(&[1.0, 2.0]), diag(&[1.0])).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let c = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(c.get(0, 0), 3.0);
        assert_eq!(c.nnz(), 2);
    }
}
