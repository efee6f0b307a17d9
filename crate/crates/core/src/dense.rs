//! Dense matrices and the small factorizations/eigensolvers used by the
//! Rayleigh–Ritz kernel and the desk-scale oracles.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{hypot, sqrt, Scalar};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major storage. Fails if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_diagonal(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[S]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    /// `y = self * x`
    pub fn mul_vec_into(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = S::zero();
            for (a, &b) in self.row(i).iter().zip(x) {
                acc += *a * b;
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scaled(&self, s: S) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self, alpha: S) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + alpha * b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x.abs_sqr()).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest `|a_ij - conj(a_ji)|` relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).abs());
            }
        }
        worst / scale
    }

    /// Replaces the matrix by `(A + A*)/2`.
    pub fn hermitize(&mut self) {
        for i in 0..self.rows {
            for j in 0..i {
                let avg = (self[(i, j)] + self[(j, i)].conj()).scale(0.5);
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
            let d = self[(i, i)].re();
            self[(i, i)] = S::from_real(d);
        }
    }
}

impl<S> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for DenseMatrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `L` with `A = L L*`.
///
/// A pivot `<= rel_tol * max_diag` is reported as [`Error::Conditioning`]
/// so callers can distinguish rank loss from a genuinely indefinite matrix.
pub fn cholesky<S: Scalar>(a: &DenseMatrix<S>, rel_tol: f64) -> Result<DenseMatrix<S>> {
    if !a.is_square() {
        return Err(Error::InvalidInput("cholesky of a non-square matrix".into()));
    }
    let n = a.rows();
    let max_diag = (0..n).map(|i| a[(i, i)].re().abs()).fold(0.0, f64::max);
    let mut l: DenseMatrix<S> = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re();
        for k in 0..j {
            d -= l[(j, k)].abs_sqr();
        }
        if !(d > rel_tol * max_diag) || !d.is_finite() {
            return Err(Error::Conditioning { index: j });
        }
        let ljj = sqrt(d);
        l[(j, j)] = S::from_real(ljj);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s.scale(1.0 / ljj);
        }
    }
    Ok(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub fn forward_substitute<S: Scalar>(l: &DenseMatrix<S>, b: &mut [S]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L* x = y` in place for lower-triangular `L`.
pub fn backward_substitute_adjoint<S: Scalar>(l: &DenseMatrix<S>, y: &mut [S]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * y[k];
        }
        y[i] = s / l[(i, i)].conj();
    }
}

/// `L^{-1} A L^{-*}` for Hermitian `A`.
pub fn congruence_inverse<S: Scalar>(l: &DenseMatrix<S>, a: &DenseMatrix<S>) -> DenseMatrix<S> {
    let n = a.rows();
    // Y = L^{-1} A, column by column
    let mut y = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut c = a.col(j);
        forward_substitute(l, &mut c);
        y.set_col(j, &c);
    }
    // C = L^{-1} Y* ... then adjoint: C = (L^{-1} (L^{-1} A)*)* = L^{-1} A L^{-*}
    let yh = y.adjoint();
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = yh.col(j);
        forward_substitute(l, &mut col);
        c.set_col(j, &col);
    }
    let mut c = c.adjoint();
    c.hermitize();
    c
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
/// orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen<S> {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix<S>,
}

/// Householder tridiagonalization followed by implicit QL iterations.
pub fn hermitian_eigen<S: Scalar>(h: &DenseMatrix<S>) -> Result<HermitianEigen<S>> {
    if !h.is_square() {
        return Err(Error::InvalidInput("eigen-decomposition of a non-square matrix".into()));
    }
    if !h.all_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let n = h.rows();
    let mut a = h.clone();
    a.hermitize();
    let mut q = DenseMatrix::<S>::identity(n);

    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let x: Vec<S> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xnorm = sqrt(x.iter().map(|v| v.abs_sqr()).sum());
        if xnorm == 0.0 {
            continue;
        }
        let x0abs = x[0].abs();
        let phase = if x0abs > 0.0 { x[0].scale(1.0 / x0abs) } else { S::one() };
        let alpha = -(phase.scale(xnorm));
        let mut v = x;
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t.abs_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let beta = 2.0 / vv;

        // p = beta * B v on the trailing block
        let mut p = vec![S::zero(); m];
        for (ii, pi) in p.iter_mut().enumerate() {
            let mut acc = S::zero();
            for jj in 0..m {
                acc += a[(k + 1 + ii, k + 1 + jj)] * v[jj];
            }
            *pi = acc.scale(beta);
        }
        let mut vp = S::zero();
        for (vi, pi) in v.iter().zip(&p) {
            vp += vi.conj() * *pi;
        }
        let kcoef = vp.re() * beta * 0.5;
        let w: Vec<S> = p.iter().zip(&v).map(|(&pi, &vi)| pi - vi.scale(kcoef)).collect();
        for ii in 0..m {
            for jj in 0..m {
                let upd = v[ii] * w[jj].conj() + w[ii] * v[jj].conj();
                a[(k + 1 + ii, k + 1 + jj)] -= upd;
            }
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            a[(i, k)] = S::zero();
            a[(k, i)] = S::zero();
        }
        // Q <- Q H
        for r in 0..n {
            let mut acc = S::zero();
            for jj in 0..m {
                acc += q[(r, k + 1 + jj)] * v[jj];
            }
            let acc = acc.scale(beta);
            for jj in 0..m {
                q[(r, k + 1 + jj)] -= acc * v[jj].conj();
            }
        }
    }

    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)].re()).collect();
    let mut e = vec![0.0; n];
    // Make the off-diagonal real with a diagonal unitary D, folding D into Q.
    let mut dphase = S::one();
    for k in 0..n.saturating_sub(1) {
        let sub = a[(k + 1, k)];
        let mag = sub.abs();
        e[k] = mag;
        if mag > 0.0 {
            dphase *= sub.scale(1.0 / mag);
        }
        for r in 0..n {
            q[(r, k + 1)] *= dphase;
        }
    }

    tridiagonal_ql(&mut d, &mut e, &mut q)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| q[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Implicit QL on a real symmetric tridiagonal matrix (`d` diagonal,
/// `e[k]` couples `k` and `k+1`). Rotations are applied to the columns of `z`.
fn tridiagonal_ql<S: Scalar>(d: &mut [f64], e: &mut [f64], z: &mut DenseMatrix<S>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Breakdown("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..z.rows() {
                    let f = z[(k, i + 1)];
                    let zi = z[(k, i)];
                    z[(k, i + 1)] = zi.scale(s) + f.scale(c);
                    z[(k, i)] = zi.scale(c) - f.scale(s);
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigensolver for small Hermitian matrices. Each rotation
/// first removes the phase of the pivot entry, then applies a real rotation.
pub fn jacobi_eigen<S: Scalar>(h: &DenseMatrix<S>) -> Result<HermitianEigen<S>> {
    if !h.is_square() {
        return Err(Error::InvalidInput("eigen-decomposition of a non-square matrix".into()));
    }
    if !h.all_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    let n = h.rows();
    let mut a = h.clone();
    a.hermitize();
    let mut v = DenseMatrix::<S>::identity(n);
    let total = a.frobenius_norm();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)].abs_sqr();
                }
            }
        }
        if off <= (f64::EPSILON * total) * (f64::EPSILON * total) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.abs();
                if mag == 0.0 {
                    continue;
                }
                // phase: scale column q by `ph`, row q by conj(ph) so a_pq becomes real
                let ph = apq.conj().scale(1.0 / mag);
                for r in 0..n {
                    a[(r, q)] *= ph;
                }
                for r in 0..n {
                    a[(q, r)] *= ph.conj();
                }
                for r in 0..n {
                    v[(r, q)] *= ph;
                }
                let app = a[(p, p)].re();
                let aqq = a[(q, q)].re();
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    let nrp = arp.scale(c) - arq.scale(s);
                    let nrq = arp.scale(s) + arq.scale(c);
                    a[(r, p)] = nrp;
                    a[(p, r)] = nrp.conj();
                    a[(r, q)] = nrq;
                    a[(q, r)] = nrq.conj();
                }
                a[(p, p)] = S::from_real(app - t * mag);
                a[(q, q)] = S::from_real(aqq + t * mag);
                a[(p, q)] = S::zero();
                a[(q, p)] = S::zero();
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp.scale(c) - vrq.scale(s);
                    v[(r, q)] = vrp.scale(s) + vrq.scale(c);
                }
            }
        }
    }

    let d: Vec<f64> = (0..n).map(|i| a[(i, i)].re()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Generalized Hermitian-definite eigenproblem `A v = λ B v` via the Cholesky
/// factor of `B`. Eigenvectors are `B`-orthonormal columns.
pub fn generalized_eigen<S: Scalar>(
    a: &DenseMatrix<S>,
    b: &DenseMatrix<S>,
    use_jacobi: bool,
) -> Result<HermitianEigen<S>> {
    if a.rows() != b.rows() || !a.is_square() || !b.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.rows() });
    }
    let l = cholesky(b, 0.0)
        .map_err(|_| Error::NotPositiveDefinite { what: "B", detail: "Cholesky factorization failed".into() })?;
    let c = congruence_inverse(&l, a);
    let eig = if use_jacobi { jacobi_eigen(&c)? } else { hermitian_eigen(&c)? };
    let n = a.rows();
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut y = eig.vectors.col(j);
        backward_substitute_adjoint(&l, &mut y);
        vectors.set_col(j, &y);
    }
    Ok(HermitianEigen { values: eig.values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Complex64;

    fn residual_ok<S: Scalar>(h: &DenseMatrix<S>, e: &HermitianEigen<S>, tol: f64) {
        let n = h.rows();
        for j in 0..n {
            let v = e.vectors.col(j);
            let hv = h.mul_vec(&v);
            let r: f64 = hv.iter().zip(&v).map(|(a, b)| (*a - b.scale(e.values[j])).abs_sqr()).sum();
            assert!(sqrt(r) <= tol * h.frobenius_norm().max(1.0), "residual {} for pair {j}", sqrt(r));
        }
    }

    #[test]
    fn two_by_two_real() {
        let h = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        for e in [hermitian_eigen(&h).unwrap(), jacobi_eigen(&h).unwrap()] {
            assert!((e.values[0] - 1.0).abs() < 1e-14);
            assert!((e.values[1] - 3.0).abs() < 1e-14);
            residual_ok(&h, &e, 1e-13);
        }
    }

    #[test]
    fn complex_hermitian_matches_both_routes() {
        let c = |re, im| Complex64::new(re, im);
        let h = DenseMatrix::from_row_major(
            3,
            3,
            vec![
                c(4.0, 0.0),
                c(1.0, 2.0),
                c(0.0, -1.0),
                c(1.0, -2.0),
                c(3.0, 0.0),
                c(0.5, 0.5),
                c(0.0, 1.0),
                c(0.5, -0.5),
                c(-1.0, 0.0),
            ],
        )
        .unwrap();
        let a = hermitian_eigen(&h).unwrap();
        let b = jacobi_eigen(&h).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
        residual_ok(&h, &a, 1e-12);
        residual_ok(&h, &b, 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let h = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky(&h, 0.0), Err(Error::Conditioning { index: 1 })));
    }

    #[test]
    fn generalized_diagonal_pencil() {
        let a = DenseMatrix::<f64>::identity(2);
        let b = DenseMatrix::from_diagonal(&[1.0, 4.0]);
        let e = generalized_eigen(&a, &b, true).unwrap();
        assert!((e.values[0] - 0.25).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }
}
