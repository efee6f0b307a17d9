//! Rayleigh–Ritz with weighted output (RRw) and the M-orthogonalization with
//! conditioning-based subspace reduction.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{
    backward_substitute_adjoint, cholesky, congruence_inverse, jacobi_eigen, DenseMatrix, HermitianEigen,
};
use crate::error::{Error, Result};
use crate::linops::{HermitianOperator, HermitianPencil};
use crate::scalar::{sqrt, Scalar};
use crate::vecops::{all_finite, axpy, combine, dot, is_zero};

/// Pivot threshold for the Cholesky factor of the diagonally scaled Gram
/// matrix; smaller pivots mean the basis is numerically dependent.
pub const GRAM_PIVOT_TOL: f64 = 1e-13;

/// Below this relative size the anchor coefficient is treated as zero.
pub const ZERO_ANCHOR_TOL: f64 = 1e-10;

/// Relative gap under which the two smallest Ritz values count as equal.
pub const RITZ_TIE_TOL: f64 = 1e-13;

/// Default γ of the Gram-diagonal reduction rule.
pub const DEFAULT_GAMMA: f64 = 1e26;

/// Role of a trial-basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisRole {
    CurrentIterate,
    PrecondResidual,
    Direction,
    Auxiliary,
    StoredMinResidual,
}

/// Ordered trial basis; the first vector is the weighting anchor `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBasis<S> {
    vectors: Vec<Vec<S>>,
    roles: Vec<BasisRole>,
}

impl<S: Scalar> TrialBasis<S> {
    pub const MAX_LEN: usize = 5;

    /// Builds a basis from `(vector, role)` pairs. The first entry must be the
    /// current iterate; 2 to 5 finite nonzero vectors of equal length.
    pub fn new(entries: Vec<(Vec<S>, BasisRole)>) -> Result<Self> {
        if !(2..=Self::MAX_LEN).contains(&entries.len()) {
            return Err(Error::InvalidInput(alloc::format!("trial basis needs 2..=5 vectors, got {}", entries.len())));
        }
        if entries[0].1 != BasisRole::CurrentIterate {
            return Err(Error::InvalidInput("first basis vector must be the current iterate".into()));
        }
        let n = entries[0].0.len();
        for (v, _) in &entries {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
            if !all_finite(v) {
                return Err(Error::NonFinite("trial basis"));
            }
            if is_zero(v) {
                return Err(Error::InvalidInput("zero vector in trial basis".into()));
            }
        }
        let (vectors, roles) = entries.into_iter().unzip();
        Ok(Self { vectors, roles })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
    #[inline]
    pub fn vectors(&self) -> &[Vec<S>] {
        &self.vectors
    }
    #[inline]
    pub fn roles(&self) -> &[BasisRole] {
        &self.roles
    }

    fn subset(&self, keep: &[usize]) -> Self {
        Self {
            vectors: keep.iter().map(|&i| self.vectors[i].clone()).collect(),
            roles: keep.iter().map(|&i| self.roles[i]).collect(),
        }
    }
}

/// Result of one RRw step.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzOutput<S> {
    pub x_next: Vec<S>,
    pub theta_next: f64,
    /// One flag per input basis vector; `true` if it was dropped.
    pub reduced: Vec<bool>,
    /// Diagonal of the M-Gram matrix of the basis actually used.
    pub gram_diag: Vec<f64>,
    /// The minimizer had no component on `x`; `x_next` is the unweighted
    /// Ritz vector with unit M-norm.
    pub zero_anchor: bool,
}

/// Smallest Ritz pair expressed in basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRitz<S> {
    /// Coefficients over the basis; the anchor weight equals one unless
    /// `zero_anchor` is set, in which case the combination has unit M-norm.
    pub coeffs: Vec<S>,
    pub theta: f64,
    pub zero_anchor: bool,
    /// All Ritz values, ascending.
    pub ritz_values: Vec<f64>,
}

/// Projected matrices `V*AV` and `V*MV` from precomputed images.
pub fn gram_matrices<S: Scalar>(vs: &[&[S]], avs: &[&[S]], mvs: &[&[S]]) -> Result<(DenseMatrix<S>, DenseMatrix<S>)> {
    let k = vs.len();
    let mut ga = DenseMatrix::zeros(k, k);
    let mut gm = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let a = dot(vs[i], avs[j]);
            let m = dot(vs[i], mvs[j]);
            ga[(i, j)] = a;
            gm[(i, j)] = m;
            if i != j {
                ga[(j, i)] = a.conj();
                gm[(j, i)] = m.conj();
            }
        }
        ga[(i, i)] = S::from_real(ga[(i, i)].re());
        gm[(i, i)] = S::from_real(gm[(i, i)].re());
    }
    if !ga.all_finite() || !gm.all_finite() {
        return Err(Error::Breakdown("non-finite Gram entries".into()));
    }
    Ok((ga, gm))
}

/// Generalized eigenpairs of a small projected pencil, ascending, with
/// `gram_m`-orthonormal eigenvectors. The pencil is diagonally equilibrated,
/// reduced by a Cholesky factor of `gram_m` and solved by cyclic Jacobi.
pub fn small_dense_eigensolve<S: Scalar>(
    gram_a: &DenseMatrix<S>,
    gram_m: &DenseMatrix<S>,
) -> Result<HermitianEigen<S>> {
    let k = gram_a.rows();
    if !gram_a.is_square() || gram_m.rows() != k || !gram_m.is_square() {
        return Err(Error::DimensionMismatch { expected: k, found: gram_m.rows() });
    }
    if !gram_a.all_finite() || !gram_m.all_finite() {
        return Err(Error::Breakdown("non-finite Gram entries".into()));
    }
    let mut scale = vec![0.0; k];
    for (i, s) in scale.iter_mut().enumerate() {
        let d = gram_m[(i, i)].re();
        if !(d > 0.0) {
            return Err(Error::Conditioning { index: i });
        }
        *s = 1.0 / sqrt(d);
    }
    let sa = DenseMatrix::from_fn(k, k, |i, j| gram_a[(i, j)].scale(scale[i] * scale[j]));
    let sm = DenseMatrix::from_fn(k, k, |i, j| gram_m[(i, j)].scale(scale[i] * scale[j]));
    let l = cholesky(&sm, GRAM_PIVOT_TOL)?;
    let c = congruence_inverse(&l, &sa);
    let eig = jacobi_eigen(&c)?;
    let mut vectors = DenseMatrix::zeros(k, k);
    for j in 0..k {
        let mut y = eig.vectors.col(j);
        backward_substitute_adjoint(&l, &mut y);
        for (yi, si) in y.iter_mut().zip(&scale) {
            *yi = yi.scale(*si);
        }
        vectors.set_col(j, &y);
    }
    Ok(HermitianEigen { values: eig.values, vectors })
}

/// Smallest Ritz pair with weighted output. `anchor` maps basis coefficients
/// to the coefficient on `x` (defaults to the first coefficient); this lets a
/// caller solve in an orthogonalized basis while weighting in the original.
pub fn weighted_ritz<S: Scalar>(
    gram_a: &DenseMatrix<S>,
    gram_m: &DenseMatrix<S>,
    anchor: Option<&[S]>,
) -> Result<WeightedRitz<S>> {
    let k = gram_a.rows();
    let eig = small_dense_eigensolve(gram_a, gram_m)?;
    let anchor_of = |y: &[S]| -> S {
        match anchor {
            Some(s) => s.iter().zip(y).fold(S::zero(), |acc, (a, b)| acc + *a * *b),
            None => y[0],
        }
    };

    // Degenerate smallest Ritz value: pick the unit combination inside the
    // cluster with the largest anchor weight.
    let theta = eig.values[0];
    let spread = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cluster = eig.values.iter().take_while(|v| **v - theta <= RITZ_TIE_TOL * spread).count();
    let mut y = eig.vectors.col(0);
    if cluster > 1 {
        let mut comb = vec![S::zero(); k];
        let mut wsum = 0.0;
        for c in 0..cluster {
            let col = eig.vectors.col(c);
            let w = anchor_of(&col).conj();
            wsum += w.abs_sqr();
            axpy(w, &col, &mut comb);
        }
        if wsum > 0.0 {
            y = comb;
            let nrm = sqrt(wsum);
            for v in &mut y {
                *v = v.scale(1.0 / nrm);
            }
        }
    }

    let c0 = anchor_of(&y);
    // The first basis vector is x in both the original and the
    // orthogonalized basis.
    let x_mnorm = sqrt(gram_m[(0, 0)].re());
    // y has unit M-norm, so |c0|·‖x‖_M is the relative size of the x part.
    if !(c0.abs() * x_mnorm > ZERO_ANCHOR_TOL) {
        return Ok(WeightedRitz { coeffs: y, theta, zero_anchor: true, ritz_values: eig.values });
    }
    let inv = S::one() / c0;
    let coeffs = y.into_iter().map(|v| v * inv).collect();
    Ok(WeightedRitz { coeffs, theta, zero_anchor: false, ritz_values: eig.values })
}

/// One RRw step over `basis`. On an ill-conditioned Gram matrix the basis is
/// reduced to `{x, w}` (the preconditioned residual, or the second vector)
/// and the step retried once.
pub fn rrw<S: Scalar>(pencil: &HermitianPencil<S>, basis: &TrialBasis<S>) -> Result<RitzOutput<S>> {
    let n = pencil.dim();
    if basis.vectors[0].len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: basis.vectors[0].len() });
    }
    let k = basis.len();
    let attempt = |b: &TrialBasis<S>| -> Result<(WeightedRitz<S>, Vec<f64>)> {
        let avs: Vec<Vec<S>> = b.vectors.iter().map(|v| pencil.a().apply(v)).collect();
        let mvs: Vec<Vec<S>> = b.vectors.iter().map(|v| pencil.m().apply(v)).collect();
        let vs: Vec<&[S]> = b.vectors.iter().map(|v| v.as_slice()).collect();
        let ar: Vec<&[S]> = avs.iter().map(|v| v.as_slice()).collect();
        let mr: Vec<&[S]> = mvs.iter().map(|v| v.as_slice()).collect();
        let (ga, gm) = gram_matrices(&vs, &ar, &mr)?;
        let diag = (0..b.len()).map(|i| gm[(i, i)].re()).collect();
        Ok((weighted_ritz(&ga, &gm, None)?, diag))
    };

    let mut reduced = vec![false; k];
    let (used, (wr, gram_diag)) = match attempt(basis) {
        Ok(r) => (basis.clone(), r),
        Err(Error::Conditioning { .. }) if k > 2 => {
            let w = basis.roles.iter().position(|r| *r == BasisRole::PrecondResidual).unwrap_or(1);
            for (i, flag) in reduced.iter_mut().enumerate() {
                *flag = i != 0 && i != w;
            }
            let sub = basis.subset(&[0, w]);
            let r = attempt(&sub)?;
            (sub, r)
        }
        Err(e) => return Err(e),
    };
    let vs: Vec<&[S]> = used.vectors.iter().map(|v| v.as_slice()).collect();
    let x_next = combine(&wr.coeffs, &vs);
    Ok(RitzOutput { x_next, theta_next: wr.theta, reduced, gram_diag, zero_anchor: wr.zero_anchor })
}

/// Which vectors survive the Gram-diagonal rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    None,
    /// Keep `{x, w}`.
    ToTwo,
    /// Keep `{x, w, p}`.
    ToThree,
}

/// Gram-diagonal reduction rule: `δ₁ > γδ₃` keeps `{x, w}`, otherwise for
/// four vectors `δ₁ > γδ₄` keeps `{x, w, p}`.
pub fn reduction_rule(delta: &[f64], gamma: f64) -> Result<Reduction> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidInput("gamma must exceed 1".into()));
    }
    let d1 = delta[0];
    if !(d1 > 0.0) || !d1.is_finite() {
        return Err(Error::Breakdown("x has zero M-norm".into()));
    }
    if delta.len() >= 3 && d1 > gamma * delta[2] {
        return Ok(Reduction::ToTwo);
    }
    if delta.len() == 4 && d1 > gamma * delta[3] {
        return Ok(Reduction::ToThree);
    }
    Ok(Reduction::None)
}

/// Unnormalized modified Gram–Schmidt in the M-inner product applied to
/// vectors together with their A- and M-images. Returns the diagonal
/// `δ_j = w_j* M w_j` and the unit upper-triangular `R` with `V = W R`
/// (column `j` of `R` holds the coefficients of `v_j` on `w_0..w_j`).
pub fn mgs_with_images<S: Scalar>(
    vs: &mut [Vec<S>],
    avs: &mut [Vec<S>],
    mvs: &mut [Vec<S>],
) -> (Vec<f64>, DenseMatrix<S>) {
    let k = vs.len();
    let mut r = DenseMatrix::identity(k);
    let mut delta = vec![0.0; k];
    for j in 0..k {
        for i in 0..j {
            if !(delta[i] > 0.0) {
                continue;
            }
            let c = dot(&vs[i], &mvs[j]).scale(1.0 / delta[i]);
            r[(i, j)] = c;
            let (lo, hi) = vs.split_at_mut(j);
            axpy(-c, &lo[i], &mut hi[0]);
            let (lo, hi) = avs.split_at_mut(j);
            axpy(-c, &lo[i], &mut hi[0]);
            let (lo, hi) = mvs.split_at_mut(j);
            axpy(-c, &lo[i], &mut hi[0]);
        }
        delta[j] = dot(&vs[j], &mvs[j]).re().max(0.0);
    }
    (delta, r)
}

/// Coefficients on `x` of each orthogonalized vector, i.e. first row of `R⁻¹`.
pub fn anchor_row<S: Scalar>(r: &DenseMatrix<S>) -> Vec<S> {
    // Solve s R = e_0 for the row vector s (R unit upper triangular).
    let k = r.rows();
    let mut s = vec![S::zero(); k];
    s[0] = S::one();
    for j in 1..k {
        let mut acc = S::zero();
        for i in 0..j {
            acc += s[i] * r[(i, j)];
        }
        s[j] = -acc;
    }
    s
}

/// Output of [`m_orthogonalize_with_reduction`].
#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonalized<S> {
    pub basis: TrialBasis<S>,
    /// `δ₁..δ_k` of the full orthogonalized basis, before any drop.
    pub gram_diag: Vec<f64>,
    pub reduction: Reduction,
}

/// M-orthogonalizes `basis` by unnormalized MGS and applies the
/// Gram-diagonal reduction rule with threshold `gamma`.
pub fn m_orthogonalize_with_reduction<S: Scalar>(
    m: &HermitianOperator<S>,
    basis: &TrialBasis<S>,
    gamma: f64,
) -> Result<Orthogonalized<S>> {
    let mut vs = basis.vectors.clone();
    let mut mvs: Vec<Vec<S>> = vs.iter().map(|v| m.apply(v)).collect();
    // A-images are not needed; empty vectors make their updates no-ops.
    let mut no_images: Vec<Vec<S>> = vec![Vec::new(); vs.len()];
    let (delta, _) = mgs_with_images(&mut vs, &mut no_images, &mut mvs);
    let reduction = reduction_rule(&delta, gamma)?;
    let keep: &[usize] = match reduction {
        Reduction::None => &[0, 1, 2, 3, 4][..vs.len()],
        Reduction::ToTwo => &[0, 1],
        Reduction::ToThree => &[0, 1, 2],
    };
    let orth = TrialBasis { vectors: vs, roles: basis.roles.clone() };
    Ok(Orthogonalized { basis: orth.subset(keep), gram_diag: delta, reduction })
}
