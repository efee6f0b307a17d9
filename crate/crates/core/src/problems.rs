//! Test pencils, reformulations of related eigenproblems into the form
//! `A x = λ M x` (smallest λ, `M` positive definite), and reference
//! eigensolvers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{
    backward_substitute_adjoint, cholesky, forward_substitute, generalized_eigen, hermitian_eigen, DenseMatrix,
    HermitianEigen,
};
use crate::error::{Error, Result};
use crate::linops::{CsrMatrix, HermitianOperator, HermitianPencil};
use crate::precond::{ichol_factor, is_positive_definite, DENSE_CAP};
use crate::scalar::{cos, sqrt, Scalar};
use crate::vecops::{axpy, dot};

/// A generated pencil with its closed-form spectrum, when one exists.
#[derive(Debug, Clone)]
pub struct TestProblem<S> {
    pub name: String,
    pub pencil: HermitianPencil<S>,
    /// Ascending exact eigenvalues.
    pub exact: Option<Vec<f64>>,
}

/// `A = diag(spectrum)`, `M = I`.
pub fn gen_diag(spectrum: &[f64]) -> Result<TestProblem<f64>> {
    if spectrum.is_empty() {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    if spectrum.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput("spectrum must be ascending".into()));
    }
    let a = HermitianOperator::from_real_diagonal(spectrum)?;
    Ok(TestProblem {
        name: format!("diag({})", spectrum.len()),
        pencil: HermitianPencil::standard(a),
        exact: Some(spectrum.to_vec()),
    })
}

/// `(1, 1+gap, 2, 3, …, top)`.
pub fn cluster_spectrum(gap: f64, top: usize) -> Vec<f64> {
    let mut s = vec![1.0, 1.0 + gap];
    s.extend((2..=top).map(|k| k as f64));
    s
}

/// `tridiag(−1, 2, −1)` of order `n`.
pub fn gen_laplace1d(n: usize) -> Result<TestProblem<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("laplace1d needs n >= 2".into()));
    }
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, 2.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
    }
    let a = HermitianOperator::from_csr(CsrMatrix::from_triplets(n, n, t)?)?;
    let exact = (1..=n).map(|k| 2.0 - 2.0 * cos(k as f64 * core::f64::consts::PI / (n as f64 + 1.0))).collect();
    Ok(TestProblem { name: format!("laplace1d({n})"), pencil: HermitianPencil::standard(a), exact: Some(exact) })
}

/// Five-point stencil `(4; −1)` on an `nx × ny` grid of interior nodes.
pub fn gen_laplace2d(nx: usize, ny: usize) -> Result<TestProblem<f64>> {
    if nx < 1 || ny < 1 || nx * ny < 2 {
        return Err(Error::InvalidInput("laplace2d needs at least two nodes".into()));
    }
    let n = nx * ny;
    let idx = |i: usize, j: usize| i * ny + j;
    let mut t = Vec::with_capacity(5 * n);
    for i in 0..nx {
        for j in 0..ny {
            let k = idx(i, j);
            t.push((k, k, 4.0));
            if i + 1 < nx {
                t.push((k, idx(i + 1, j), -1.0));
                t.push((idx(i + 1, j), k, -1.0));
            }
            if j + 1 < ny {
                t.push((k, idx(i, j + 1), -1.0));
                t.push((idx(i, j + 1), k, -1.0));
            }
        }
    }
    let a = HermitianOperator::from_csr(CsrMatrix::from_triplets(n, n, t)?)?;
    let pi = core::f64::consts::PI;
    let mut exact = Vec::with_capacity(n);
    for k in 1..=nx {
        for l in 1..=ny {
            exact.push(
                4.0 - 2.0 * cos(k as f64 * pi / (nx as f64 + 1.0)) - 2.0 * cos(l as f64 * pi / (ny as f64 + 1.0)),
            );
        }
    }
    exact.sort_by(f64::total_cmp);
    Ok(TestProblem { name: format!("laplace2d({nx},{ny})"), pencil: HermitianPencil::standard(a), exact: Some(exact) })
}

/// Dirichlet Laplacian on `[0,2]×[0,1]` by the scaled five-point stencil
/// with `nx × ny` mesh intervals. Nodes on the line `x = 1` with
/// `y0 ≤ y ≤ y1` are removed, which cuts every coupling across the slit.
/// An empty range (`y1 < y0`) gives the plain rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitGrid {
    pub nx: usize,
    pub ny: usize,
    /// Grid coordinates `(i, j)` of each unknown.
    pub nodes: Vec<(usize, usize)>,
}

impl SlitGrid {
    pub fn new(nx: usize, ny: usize, slit: (f64, f64)) -> Result<Self> {
        if nx < 4 || ny < 2 || !nx.is_multiple_of(2) {
            return Err(Error::InvalidInput("slit2d needs even nx >= 4 and ny >= 2".into()));
        }
        let hy = 1.0 / ny as f64;
        let on_slit = |i: usize, j: usize| {
            let y = j as f64 * hy;
            i == nx / 2 && slit.0 <= slit.1 && y >= slit.0 - 1e-12 && y <= slit.1 + 1e-12
        };
        let mut nodes = Vec::new();
        for i in 1..nx {
            for j in 1..ny {
                if !on_slit(i, j) {
                    nodes.push((i, j));
                }
            }
        }
        Ok(Self { nx, ny, nodes })
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.nodes.binary_search(&(i, j)).ok()
    }
}

pub fn gen_slit2d(nx: usize, ny: usize, slit: (f64, f64)) -> Result<TestProblem<f64>> {
    let grid = SlitGrid::new(nx, ny, slit)?;
    let hx2 = {
        let h = 2.0 / nx as f64;
        1.0 / (h * h)
    };
    let hy2 = {
        let h = 1.0 / ny as f64;
        1.0 / (h * h)
    };
    let n = grid.nodes.len();
    let mut t = Vec::with_capacity(5 * n);
    for (k, &(i, j)) in grid.nodes.iter().enumerate() {
        t.push((k, k, 2.0 * hx2 + 2.0 * hy2));
        for (di, dj, w) in [(1isize, 0isize, hx2), (-1, 0, hx2), (0, 1, hy2), (0, -1, hy2)] {
            let (ii, jj) = (i as isize + di, j as isize + dj);
            if ii < 0 || jj < 0 {
                continue;
            }
            if let Some(m) = grid.index_of(ii as usize, jj as usize) {
                t.push((k, m, -w));
            }
        }
    }
    let a = HermitianOperator::from_csr(CsrMatrix::from_triplets(n, n, t)?)?;
    Ok(TestProblem { name: format!("slit2d({nx},{ny})"), pencil: HermitianPencil::standard(a), exact: None })
}

/// How a canonical eigenvalue `ν` maps back to the original problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenMap {
    /// `λ = ν + σ`.
    Shift { sigma: f64 },
    /// `ν = (λ−σ)²`; the branch `λ = σ ± √ν` is fixed by the sign of
    /// `x*(L−σS)x`.
    Squared { sigma: f64 },
    /// `ν = −s/(λ−σ)`, so `λ = σ − s/ν`.
    NegReciprocal { sigma: f64, s: f64 },
    /// `ν = ω²` for the target `ω > 0`.
    SquareRoot,
}

impl EigenMap {
    /// Original eigenvalue for `nu`; `probe` is `x*(L−σS)x` of the
    /// canonical eigenvector, used only by [`EigenMap::Squared`].
    pub fn to_original(&self, nu: f64, probe: Option<f64>) -> f64 {
        match *self {
            Self::Shift { sigma } => nu + sigma,
            Self::Squared { sigma } => {
                let r = sqrt(nu.max(0.0));
                if probe.is_some_and(|p| p < 0.0) {
                    sigma - r
                } else {
                    sigma + r
                }
            }
            Self::NegReciprocal { sigma, s } => sigma - s / nu,
            Self::SquareRoot => sqrt(nu.max(0.0)),
        }
    }

    /// Canonical eigenvalue of an original one.
    pub fn to_canonical(&self, lambda: f64) -> f64 {
        match *self {
            Self::Shift { sigma } => lambda - sigma,
            Self::Squared { sigma } => (lambda - sigma) * (lambda - sigma),
            Self::NegReciprocal { sigma, s } => -s / (lambda - sigma),
            Self::SquareRoot => lambda * lambda,
        }
    }
}

/// A reformulated problem.
#[derive(Debug, Clone)]
pub struct Transformed<S> {
    pub pencil: HermitianPencil<S>,
    pub map: EigenMap,
    /// `L − σS`, kept for branch probes.
    pub shifted: Option<HermitianOperator<S>>,
}

impl<S: Scalar> Transformed<S> {
    /// Original eigenvalue of the canonical pair `(ν, x)`.
    pub fn original(&self, nu: f64, x: &[S]) -> f64 {
        let probe = self.shifted.as_ref().map(|l| dot(x, &l.apply(x)).re());
        self.map.to_original(nu, probe)
    }
}

fn check_pair<S: Scalar>(l: &HermitianOperator<S>, s: &HermitianOperator<S>) -> Result<()> {
    if l.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: s.dim() });
    }
    Ok(())
}

fn require_pd<S: Scalar>(op: &HermitianOperator<S>, what: &'static str) -> Result<()> {
    if is_positive_definite(op) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { what, detail: "Cholesky probe failed".into() })
    }
}

/// `(L − σS, S)`: eigenvalues shift by `−σ`.
pub fn transform_shift_definite<S: Scalar>(
    l: &HermitianOperator<S>,
    s: &HermitianOperator<S>,
    sigma: f64,
) -> Result<Transformed<S>> {
    check_pair(l, s)?;
    let lt = l.add_scaled(-sigma, s)?;
    require_pd(&lt, "L - sigma S")?;
    require_pd(s, "S")?;
    Ok(Transformed { pencil: HermitianPencil::new(lt, s.clone())?, map: EigenMap::Shift { sigma }, shifted: None })
}

/// Dense `C* B⁻¹ C` for Hermitian `C` and positive definite `B`.
fn dense_sandwich<S: Scalar>(c: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
    let lb =
        cholesky(b, 0.0).map_err(|_| Error::NotPositiveDefinite { what: "S", detail: "Cholesky failed".into() })?;
    let n = c.rows();
    // Y = L_b⁻¹ C; result = Y* Y.
    let mut y = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = c.col(j);
        forward_substitute(&lb, &mut col);
        y.set_col(j, &col);
    }
    let mut out = y.adjoint().matmul(&y);
    out.hermitize();
    Ok(out)
}

/// Dense inverse of a positive definite matrix.
fn dense_pd_inverse<S: Scalar>(b: &DenseMatrix<S>, what: &'static str) -> Result<DenseMatrix<S>> {
    let l = cholesky(b, 0.0).map_err(|_| Error::NotPositiveDefinite { what, detail: "Cholesky failed".into() })?;
    let n = b.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![S::zero(); n];
        e[j] = S::one();
        forward_substitute(&l, &mut e);
        backward_substitute_adjoint(&l, &mut e);
        inv.set_col(j, &e);
    }
    inv.hermitize();
    Ok(inv)
}

fn dense_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::Unsupported(format!("dense transform limited to n <= {DENSE_CAP}")));
    }
    Ok(())
}

/// Folded form for eigenvalues near an interior shift. With
/// `sign_split = None` the pencil is `(L̃S⁻¹L̃, S)` and `ν = (λ−σ)²`, so the
/// smallest ν belongs to the eigenvalue closest to σ. With
/// `sign_split = Some(s)` the pencil is `(−s·L̃, L̃S⁻¹L̃)` and
/// `ν = −s/(λ−σ)`: `s = +1` targets the nearest eigenvalue above σ, `s = −1`
/// the nearest below.
pub fn transform_interior_folded<S: Scalar>(
    l: &HermitianOperator<S>,
    s: &HermitianOperator<S>,
    sigma: f64,
    sign_split: Option<f64>,
) -> Result<Transformed<S>> {
    check_pair(l, s)?;
    dense_cap(l.dim())?;
    let lt = l.add_scaled(-sigma, s)?;
    let sd = s.to_dense();
    let folded = dense_sandwich(&lt.to_dense(), &sd)?;
    // L̃ singular makes the folded matrix singular.
    if cholesky(&folded, 1e-14).is_err() {
        return Err(Error::InvalidInput(format!("shift {sigma} hits an eigenvalue: L - sigma S is singular")));
    }
    let folded = HermitianOperator::from_dense(folded)?;
    match sign_split {
        None => Ok(Transformed {
            pencil: HermitianPencil::new(folded, s.clone())?,
            map: EigenMap::Squared { sigma },
            shifted: Some(lt),
        }),
        Some(sg) => {
            let sg = if sg < 0.0 { -1.0 } else { 1.0 };
            Ok(Transformed {
                pencil: HermitianPencil::new(lt.scaled(-sg), folded)?,
                map: EigenMap::NegReciprocal { sigma, s: sg },
                shifted: Some(lt),
            })
        }
    }
}

/// Pencil `(L, S)` with `L̃ = L − σS` definite and `S` possibly indefinite.
/// * `L̃ > 0`, `S > 0`: the shift form `(L̃, S)`.
/// * `L̃ > 0`, `S` indefinite: `(−S, L̃)` with `ν = −1/(λ−σ)`, targeting the
///   smallest eigenvalue above σ.
/// * `L̃ < 0`: `(S, −L̃)` with `ν = −1/(λ−σ)`.
pub fn transform_definite_pencil<S: Scalar>(
    l: &HermitianOperator<S>,
    s: &HermitianOperator<S>,
    sigma: f64,
) -> Result<Transformed<S>> {
    check_pair(l, s)?;
    let lt = l.add_scaled(-sigma, s)?;
    let map = EigenMap::NegReciprocal { sigma, s: 1.0 };
    if is_positive_definite(&lt) {
        if is_positive_definite(s) {
            return transform_shift_definite(l, s, sigma);
        }
        return Ok(Transformed { pencil: HermitianPencil::new(s.scaled(-1.0), lt)?, map, shifted: None });
    }
    let neg = lt.scaled(-1.0);
    if is_positive_definite(&neg) {
        return Ok(Transformed { pencil: HermitianPencil::new(s.clone(), neg)?, map, shifted: None });
    }
    Err(Error::NotPositiveDefinite { what: "L - sigma S", detail: "neither definite nor negative definite".into() })
}

/// Layout of the linear-response reformulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseForm {
    /// `(S̃, L̃⁻¹)` (or `(L̃, S̃⁻¹)`), whose eigenvalues are the squared targets.
    InversePair,
    /// `diag(L̃, S̃) u = λ [0 I; I 0] u` routed through the definite-pencil
    /// transform at σ = 0.
    BlockPencil,
}

/// Smallest positive eigenvalues of `[0 L̃; S̃ 0]`.
pub fn transform_linear_response<S: Scalar>(
    lt: &HermitianOperator<S>,
    st: &HermitianOperator<S>,
    form: ResponseForm,
) -> Result<Transformed<S>> {
    check_pair(lt, st)?;
    let n = lt.dim();
    match form {
        ResponseForm::InversePair => {
            dense_cap(n)?;
            let (a, b) = if is_positive_definite(lt) {
                (st, lt)
            } else if is_positive_definite(st) {
                (lt, st)
            } else {
                return Err(Error::NotPositiveDefinite {
                    what: "L~ and S~",
                    detail: "neither block is definite".into(),
                });
            };
            let inv = HermitianOperator::from_dense(dense_pd_inverse(&b.to_dense(), "linear-response block")?)?;
            Ok(Transformed { pencil: HermitianPencil::new(a.clone(), inv)?, map: EigenMap::SquareRoot, shifted: None })
        }
        ResponseForm::BlockPencil => {
            require_pd(lt, "L~")?;
            require_pd(st, "S~")?;
            let mut tl = Vec::new();
            let mut ts = Vec::new();
            let (cl, cs) = (lt.to_csr(), st.to_csr());
            for i in 0..n {
                let (c, v) = cl.row(i);
                tl.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, x)));
                let (c, v) = cs.row(i);
                tl.extend(c.iter().zip(v).map(|(&j, &x)| (n + i, n + j, x)));
                ts.push((i, n + i, S::one()));
                ts.push((n + i, i, S::one()));
            }
            let big_l = HermitianOperator::from_csr(CsrMatrix::from_triplets(2 * n, 2 * n, tl)?)?;
            let big_s = HermitianOperator::from_csr(CsrMatrix::from_triplets(2 * n, 2 * n, ts)?)?;
            transform_definite_pencil(&big_l, &big_s, 0.0)
        }
    }
}

/// Full dense solution of `A x = λ M x`: ascending values, M-orthonormal
/// eigenvectors as columns.
pub fn dense_oracle<S: Scalar>(pencil: &HermitianPencil<S>) -> Result<HermitianEigen<S>> {
    if pencil.dim() > DENSE_CAP {
        return Err(Error::Unsupported(format!("dense oracle limited to n <= {DENSE_CAP}")));
    }
    generalized_eigen(&pencil.a().to_dense(), &pencil.m().to_dense(), false)
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<HermitianEigen<f64>> {
    let k = alpha.len();
    let t = DenseMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    hermitian_eigen(&t)
}

/// Smallest Ritz value of `A` on the Krylov spaces `K_1, …, K_steps`
/// generated from `x0` (Euclidean inner product, full reorthogonalization).
/// Stops early if the space becomes invariant.
pub fn lanczos_ritz_sequence<S: Scalar>(a: &HermitianOperator<S>, x0: &[S], steps: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let nrm = sqrt(dot(x0, x0).re());
    if !(nrm > 0.0) {
        return Err(Error::InvalidInput("zero start vector".into()));
    }
    let mut q: Vec<Vec<S>> = vec![x0.iter().map(|v| v.scale(1.0 / nrm)).collect()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut out = Vec::new();
    for k in 0..steps.min(n) {
        let mut w = a.apply(&q[k]);
        alpha.push(dot(&q[k], &w).re());
        for _ in 0..2 {
            for qj in &q {
                let c = dot(qj, &w);
                axpy(-c, qj, &mut w);
            }
        }
        let e = tridiagonal_eigen(&alpha, &beta)?;
        out.push(e.values[0]);
        let b = sqrt(dot(&w, &w).re());
        if !(b > 1e-14 * alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|v| v.scale(1.0 / b)).collect());
    }
    Ok(out)
}

/// Smallest `count` eigenvalues by shift-invert Lanczos on
/// `(A − σM)⁻¹M` with an exact sparse Cholesky factor, `σ` below the
/// spectrum. Returns ascending eigenvalues with their residual estimates.
pub fn shift_invert_lanczos<S: Scalar>(
    pencil: &HermitianPencil<S>,
    sigma: f64,
    count: usize,
    steps: usize,
    x0: &[S],
) -> Result<Vec<(f64, f64)>> {
    let n = pencil.dim();
    let shifted = pencil.a().add_scaled(-sigma, pencil.m())?;
    let factor = ichol_factor(&shifted.to_csr(), 0.0, 1.0)?;
    let m = pencil.m();
    let mnorm = |v: &[S]| sqrt(dot(v, &m.apply(v)).re());
    let nrm = mnorm(x0);
    if !(nrm > 0.0) {
        return Err(Error::InvalidInput("zero start vector".into()));
    }
    let mut q: Vec<Vec<S>> = vec![x0.iter().map(|v| v.scale(1.0 / nrm)).collect()];
    let mut mq: Vec<Vec<S>> = vec![m.apply(&q[0])];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let steps = steps.min(n);
    let mut last_b = 0.0;
    for k in 0..steps {
        let mut w = mq[k].clone();
        factor.solve_in_place(&mut w);
        alpha.push(dot(&mq[k], &w).re());
        for _ in 0..2 {
            for (qj, mqj) in q.iter().zip(&mq) {
                let c = dot(mqj, &w);
                axpy(-c, qj, &mut w);
            }
        }
        let mw = m.apply(&w);
        let b = sqrt(dot(&w, &mw).re().max(0.0));
        last_b = b;
        if k + 1 == steps || !(b > 1e-14 * alpha.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))) {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|v| v.scale(1.0 / b)).collect());
        mq.push(mw.iter().map(|v| v.scale(1.0 / b)).collect());
    }
    let e = tridiagonal_eigen(&alpha, &beta)?;
    let k = alpha.len();
    let mut out: Vec<(f64, f64)> = (0..k)
        .rev()
        .take(count)
        .map(|c| {
            let theta = e.values[c];
            let lam = sigma + 1.0 / theta;
            let est = (last_b * e.vectors[(k - 1, c)]).abs() / (theta * theta);
            (lam, est)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diag_attaches_spectrum() {
        let p = gen_diag(&[1.0, 2.0]).unwrap();
        assert_eq!(p.exact.unwrap(), vec![1.0, 2.0]);
        assert!(gen_diag(&[2.0, 1.0]).is_err());
        let c = cluster_spectrum(1e-6, 1000);
        assert_eq!(c.len(), 1001);
        assert_relative_eq!(c[1] - c[0], 1e-6, max_relative = 1e-9);
    }

    #[test]
    fn laplace1d_closed_forms() {
        let p = gen_laplace1d(2).unwrap();
        let e = p.exact.unwrap();
        assert_relative_eq!(e[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(e[1], 3.0, max_relative = 1e-15);
        let p = gen_laplace1d(3).unwrap();
        assert_relative_eq!(p.exact.unwrap()[0], 2.0 - 2f64.sqrt(), max_relative = 1e-14);
        let p = gen_laplace1d(10).unwrap();
        let o = dense_oracle(&p.pencil).unwrap();
        for (a, b) in o.values.iter().zip(p.exact.unwrap()) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn laplace2d_matches_oracle() {
        let p = gen_laplace2d(5, 4).unwrap();
        let o = dense_oracle(&p.pencil).unwrap();
        for (a, b) in o.values.iter().zip(p.exact.unwrap()) {
            assert_relative_eq!(*a, b, max_relative = 1e-11);
        }
    }

    #[test]
    fn slit_rows_have_no_cross_couplings() {
        let (nx, ny) = (12, 10);
        let g = SlitGrid::new(nx, ny, (0.1, 0.9)).unwrap();
        let p = gen_slit2d(nx, ny, (0.1, 0.9)).unwrap();
        let a = p.pencil.a().to_csr();
        for (k, &(i, _)) in g.nodes.iter().enumerate() {
            let (cols, _) = a.row(k);
            for &c in cols {
                let (ic, _) = g.nodes[c];
                // No edge joins x < 1 and x > 1 except through an open node on x = 1.
                assert!(!(i < nx / 2 && ic > nx / 2) && !(i > nx / 2 && ic < nx / 2));
            }
        }
        assert_eq!(g.nodes.len(), (nx - 1) * (ny - 1) - 9);
    }

    #[test]
    fn slit_extremes() {
        let plain = gen_slit2d(8, 4, (1.0, 0.0)).unwrap();
        assert_eq!(plain.pencil.dim(), 7 * 3);
        let full = gen_slit2d(8, 4, (0.0, 1.0)).unwrap();
        let o = dense_oracle(&full.pencil).unwrap();
        assert_relative_eq!(o.values[0], o.values[1], max_relative = 1e-12);
    }

    #[test]
    fn shift_definite_diagonal() {
        let l = HermitianOperator::<f64>::from_real_diagonal(&[1.0, 2.0]).unwrap();
        let s = HermitianOperator::identity(2);
        let t = transform_shift_definite(&l, &s, 0.5).unwrap();
        assert_eq!(t.pencil.a().diagonal(), vec![0.5, 1.5]);
        assert_eq!(t.map.to_original(0.5, None), 1.0);
        assert!(transform_shift_definite(&l, &s, 1.5).is_err());
    }

    #[test]
    fn folded_diagonal() {
        let l = HermitianOperator::<f64>::from_real_diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let s = HermitianOperator::identity(3);
        let t = transform_interior_folded(&l, &s, 1.9, None).unwrap();
        let o = dense_oracle(&t.pencil).unwrap();
        assert_relative_eq!(o.values[0], 0.01, max_relative = 1e-12);
        assert_relative_eq!(t.original(o.values[0], &o.vectors.col(0)), 2.0, max_relative = 1e-12);
        assert_relative_eq!(t.original(o.values[1], &o.vectors.col(1)), 1.0, max_relative = 1e-12);
        assert!(transform_interior_folded(&l, &s, 2.0, None).is_err());
        for sg in [1.0, -1.0] {
            let t = transform_interior_folded(&l, &s, 1.9, Some(sg)).unwrap();
            let o = dense_oracle(&t.pencil).unwrap();
            let want = if sg > 0.0 { 2.0 } else { 1.0 };
            assert_relative_eq!(t.original(o.values[0], &o.vectors.col(0)), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn definite_pencil_sign_flip() {
        let l = HermitianOperator::<f64>::from_real_diagonal(&[-1.0, -1.0]).unwrap();
        let s = HermitianOperator::identity(2);
        let t = transform_definite_pencil(&l, &s, 0.0).unwrap();
        assert_eq!(t.pencil.a().diagonal(), vec![1.0, 1.0]);
        assert_eq!(t.map.to_original(1.0, None), -1.0);
    }

    #[test]
    fn linear_response_identity_and_diag() {
        let i2 = HermitianOperator::<f64>::identity(2);
        for form in [ResponseForm::InversePair, ResponseForm::BlockPencil] {
            let t = transform_linear_response(&i2, &i2, form).unwrap();
            let o = dense_oracle(&t.pencil).unwrap();
            assert_relative_eq!(t.map.to_original(o.values[0], None), 1.0, max_relative = 1e-12);
        }
        let l = HermitianOperator::<f64>::from_real_diagonal(&[1.0, 4.0]).unwrap();
        let t = transform_linear_response(&l, &i2, ResponseForm::InversePair).unwrap();
        let o = dense_oracle(&t.pencil).unwrap();
        let targets: Vec<f64> = o.values.iter().map(|&v| t.map.to_original(v, None)).collect();
        assert_relative_eq!(targets[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(targets[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn lanczos_sequence_is_monotone_and_exact_at_full_order() {
        let p = gen_laplace1d(12).unwrap();
        let x0 = vec![1.0; 12];
        let seq = lanczos_ritz_sequence(p.pencil.a(), &x0, 12).unwrap();
        for w in seq.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
        // The ones vector is symmetric, so only odd modes are reachable.
        assert_relative_eq!(*seq.last().unwrap(), p.exact.unwrap()[0], max_relative = 1e-10);
    }

    #[test]
    fn shift_invert_matches_closed_form() {
        let p = gen_laplace2d(20, 15).unwrap();
        let x0: Vec<f64> = (0..300).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let v = shift_invert_lanczos(&p.pencil, 0.0, 2, 80, &x0).unwrap();
        let e = p.exact.unwrap();
        assert_relative_eq!(v[0].0, e[0], max_relative = 1e-11);
        assert_relative_eq!(v[1].0, e[1], max_relative = 1e-11);
    }
}
