//! Small BLAS-1 style helpers over slices.

use alloc::vec::Vec;

use crate::scalar::{sqrt, Scalar};

/// `x* y` (conjugate-linear in the first argument).
#[inline]
pub fn dot<S: Scalar>(x: &[S], y: &[S]) -> S {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = S::zero();
    for (a, b) in x.iter().zip(y) {
        acc += a.conj() * *b;
    }
    acc
}

#[inline]
pub fn norm2<S: Scalar>(x: &[S]) -> f64 {
    sqrt(x.iter().map(|v| v.abs_sqr()).sum())
}

/// `y += alpha * x`
#[inline]
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

#[inline]
pub fn scale<S: Scalar>(alpha: S, x: &mut [S]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

#[inline]
pub fn scale_real<S: Scalar>(alpha: f64, x: &mut [S]) {
    for xi in x.iter_mut() {
        *xi = xi.scale(alpha);
    }
}

/// `sum_j coeffs[j] * vectors[j]`
pub fn combine<S: Scalar>(coeffs: &[S], vectors: &[&[S]]) -> Vec<S> {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut out = alloc::vec![S::zero(); n];
    for (&c, v) in coeffs.iter().zip(vectors) {
        if c != S::zero() {
            axpy(c, v, &mut out);
        }
    }
    out
}

#[inline]
pub fn all_finite<S: Scalar>(x: &[S]) -> bool {
    x.iter().all(|v| v.is_finite())
}

#[inline]
pub fn is_zero<S: Scalar>(x: &[S]) -> bool {
    x.iter().all(|v| *v == S::zero())
}
