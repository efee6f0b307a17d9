//! Steepest descent, locally optimal CG variants and generalized Davidson.

use alloc::vec;
use alloc::vec::Vec;

use super::{drive, ritz_ladder, Current, Event, Imaged, Method, Ops, SolveResult, SolverConfig, Stepper};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linops::HermitianPencil;
use crate::precond::Preconditioner;
use crate::rayleigh_ritz::{anchor_row, mgs_with_images, reduction_rule, small_dense_eigensolve, Reduction};
use crate::scalar::{sqrt, Scalar};
use crate::vecops::{axpy, dot};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Psd,
    Lopcg,
    Lopcgx,
}

/// PSD, LOPCG and LOPCGx differ only in the trial basis.
struct LocallyState<S> {
    mode: Mode,
    p: Option<Imaged<S>>,
    /// `x⁽ⁱ⁻¹⁾` and `x⁽ⁱ⁻²⁾` with images (LOPCGx only).
    prev: [Option<Imaged<S>>; 2],
}

/// `w = T r` with images.
fn precond_residual<S: Scalar>(ops: &mut Ops<'_, S>, cur: &Current<S>) -> Imaged<S> {
    let w = ops.t(&cur.r);
    ops.imaged(w)
}

impl<S: Scalar> Stepper<S> for LocallyState<S> {
    fn step(&mut self, ops: &mut Ops<'_, S>, cur: &Current<S>, _i: usize, events: &mut Vec<Event>) -> Result<Vec<S>> {
        let w = precond_residual(ops, cur);
        let mode = self.mode;
        let x_im2 = if mode == Mode::Lopcgx { self.prev[1].as_ref() } else { None };
        let mut basis: Vec<&Imaged<S>> = vec![&cur.x, &w];
        let mut subsets: Vec<&[usize]> = Vec::new();
        let mut reasons: Vec<Option<Event>> = Vec::new();
        match (mode, self.p.as_ref(), x_im2) {
            (Mode::Psd, _, _) | (_, None, _) => {}
            (_, Some(p), None) => {
                basis.push(p);
                subsets.push(&[0, 1, 2]);
                reasons.push(None);
            }
            (_, Some(p), Some(xm2)) => {
                basis.push(p);
                basis.push(xm2);
                subsets.push(&[0, 1, 2, 3]);
                reasons.push(None);
                subsets.push(&[0, 1, 2]);
                reasons.push(Some(Event::Reduce3));
            }
        }
        subsets.push(&[0, 1]);
        reasons.push(if subsets.len() > 1 { Some(Event::FallbackPsd) } else { None });
        let out = ritz_ladder(&basis, &subsets, None)?;
        if let Some(e) = reasons[out.used] {
            events.push(e);
        }
        if out.dir.is_none() {
            events.push(Event::ZeroAnchor);
        }
        if mode == Mode::Lopcgx {
            self.prev[1] = self.prev[0].take();
            self.prev[0] = Some(cur.x.clone());
        }
        self.p = out.dir;
        Ok(out.x_new)
    }

    fn rescale(&mut self, s: f64) {
        // Stored vectors share the iterate's scale.
        for v in self.p.iter_mut().chain(self.prev.iter_mut().flatten()) {
            v.scale(S::from_real(s));
        }
    }
}

fn run_locally<S: Scalar>(
    mode: Mode,
    method: Method,
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    let mut st = LocallyState { mode, p: None, prev: [None, None] };
    drive(method, pencil, t, x0, config, &mut st)
}

/// Preconditioned steepest descent: RRw over `{x, Tr}`.
pub fn solve_psd<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    run_locally(Mode::Psd, Method::Psd, pencil, t, x0, config)
}

/// LOPCG: RRw over `{x, Tr, p}` with `p⁽ⁱ⁺¹⁾ = x⁽ⁱ⁺¹⁾ − x⁽ⁱ⁾` and `p⁽⁰⁾ = 0`.
/// An ill-conditioned Gram matrix turns the step into a PSD step.
pub fn solve_lopcg<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    run_locally(Mode::Lopcg, Method::Lopcg, pencil, t, x0, config)
}

/// LOPCG with the extra iterate `x⁽ⁱ⁻²⁾` in the trial subspace.
pub fn solve_lopcgx<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    run_locally(Mode::Lopcgx, Method::Lopcgx, pencil, t, x0, config)
}

/// `|cos∠_M(a, x)|` from images.
pub(crate) fn m_cosine<S: Scalar>(a: &Imaged<S>, x: &Imaged<S>) -> f64 {
    let num = dot(&a.v, &x.mv).abs();
    let den = a.m_norm() * x.m_norm();
    if den > 0.0 {
        (num / den).min(1.0)
    } else {
        0.0
    }
}

struct Augmented<S> {
    tau: f64,
    gamma: f64,
    a: Option<Imaged<S>>,
    p: Option<Imaged<S>>,
    /// Decision taken in `observe` for the coming step.
    include_a: bool,
}

impl<S: Scalar> Stepper<S> for Augmented<S> {
    fn observe(&mut self, cur: &Current<S>, i: usize, events: &mut Vec<Event>) -> Option<f64> {
        let a = self.a.get_or_insert_with(|| cur.x.clone());
        let phi = m_cosine(a, &cur.x);
        self.include_a = false;
        if i > 0 && self.p.is_some() {
            if phi < self.tau {
                *a = cur.x.clone();
                events.push(Event::AuxUpdate);
            } else {
                self.include_a = true;
            }
        }
        Some(phi)
    }

    fn step(&mut self, ops: &mut Ops<'_, S>, cur: &Current<S>, _i: usize, events: &mut Vec<Event>) -> Result<Vec<S>> {
        let w = precond_residual(ops, cur);
        let Some(p) = self.p.as_ref() else {
            let out = ritz_ladder(&[&cur.x, &w], &[&[0, 1]], None)?;
            if out.dir.is_none() {
                events.push(Event::ZeroAnchor);
            }
            self.p = out.dir;
            return Ok(out.x_new);
        };
        let mut vs = vec![cur.x.v.clone(), w.v, p.v.clone()];
        let mut avs = vec![cur.x.av.clone(), w.av, p.av.clone()];
        let mut mvs = vec![cur.x.mv.clone(), w.mv, p.mv.clone()];
        if self.include_a {
            let a = self.a.as_ref().expect("auxiliary vector is set in observe");
            vs.push(a.v.clone());
            avs.push(a.av.clone());
            mvs.push(a.mv.clone());
        }
        let (delta, r) = mgs_with_images(&mut vs, &mut avs, &mut mvs);
        let reduction = reduction_rule(&delta, self.gamma)?;
        let keep = match reduction {
            Reduction::None => vs.len(),
            Reduction::ToTwo => {
                events.push(Event::Reduce2);
                2
            }
            Reduction::ToThree => {
                events.push(Event::Reduce3);
                3
            }
        };
        let orth: Vec<Imaged<S>> =
            vs.into_iter().zip(avs).zip(mvs).take(keep).map(|((v, av), mv)| Imaged { v, av, mv }).collect();
        if orth.iter().skip(1).any(|im| im.v.iter().all(|e| *e == S::zero())) && keep == 2 {
            return Err(Error::DegenerateSubspace("preconditioned residual is parallel to x"));
        }
        let anchor = anchor_row(&r);
        let refs: Vec<&Imaged<S>> = orth.iter().collect();
        let full: Vec<usize> = (0..keep).collect();
        let mut subsets: Vec<&[usize]> = vec![&full];
        if keep > 2 {
            subsets.push(&[0, 1]);
        }
        let out = ritz_ladder(&refs, &subsets, Some(&anchor))?;
        if out.used > 0 {
            events.push(Event::Reduce2);
        }
        if out.dir.is_none() {
            events.push(Event::ZeroAnchor);
        }
        self.p = out.dir;
        Ok(out.x_new)
    }

    fn rescale(&mut self, s: f64) {
        // The Gram-diagonal rule compares absolute norms, so `a` must follow
        // the iterate's scale.
        for v in self.p.iter_mut().chain(self.a.iter_mut()) {
            v.scale(S::from_real(s));
        }
    }
}

/// Augmented LOPCG: the auxiliary vector `a` starts at `x⁽⁰⁾` and is replaced
/// by the current iterate once `|cos∠_M(a, x⁽ⁱ⁾)| < τ`; otherwise it joins the
/// trial subspace. The basis is M-orthogonalized and reduced by the γ rule.
pub fn solve_lopcga<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    let mut st = Augmented { tau: config.tau_angle, gamma: config.gamma_gram, a: None, p: None, include_a: false };
    drive(Method::Lopcga, pencil, t, x0, config, &mut st)
}

/// Non-restarted generalized Davidson up to `max_dim` basis vectors.
struct Davidson<S> {
    max_dim: usize,
    basis: Vec<Imaged<S>>,
    /// Projected `V*AV` and `V*MV` of the current basis.
    h: DenseMatrix<S>,
    g: DenseMatrix<S>,
    prev_x: Option<Imaged<S>>,
}

impl<S: Scalar> Davidson<S> {
    /// Appends `v` after two passes of M-orthogonalization; returns `false`
    /// when nothing independent is left.
    fn append(&mut self, ops: &mut Ops<'_, S>, v: Vec<S>) -> bool {
        let mut v = v;
        let initial = {
            let mv = ops.m(&v);
            sqrt(dot(&v, &mv).re().max(0.0))
        };
        if !(initial > 0.0) {
            return false;
        }
        for _ in 0..2 {
            for b in &self.basis {
                let c = dot(&b.mv, &v);
                axpy(-c, &b.v, &mut v);
            }
        }
        let mv = ops.m(&v);
        let nrm = sqrt(dot(&v, &mv).re().max(0.0));
        if !(nrm > 1e-10 * initial) {
            return false;
        }
        let mut im = ops.imaged(v);
        im.scale(S::from_real(1.0 / nrm));
        self.basis.push(im);
        true
    }

    fn rebuild_projection(&mut self) {
        let k = self.basis.len();
        let mut h = DenseMatrix::zeros(k, k);
        let mut g = DenseMatrix::zeros(k, k);
        let old = self.h.rows();
        for i in 0..k {
            for j in 0..k {
                if i < old && j < old {
                    h[(i, j)] = self.h[(i, j)];
                    g[(i, j)] = self.g[(i, j)];
                } else if j >= i {
                    h[(i, j)] = dot(&self.basis[i].v, &self.basis[j].av);
                    g[(i, j)] = dot(&self.basis[i].v, &self.basis[j].mv);
                } else {
                    h[(i, j)] = h[(j, i)].conj();
                    g[(i, j)] = g[(j, i)].conj();
                }
            }
        }
        for i in old..k {
            h[(i, i)] = S::from_real(h[(i, i)].re());
            g[(i, i)] = S::from_real(g[(i, i)].re());
        }
        self.h = h;
        self.g = g;
    }

    fn restart(&mut self, ops: &mut Ops<'_, S>, cur: &Current<S>, w: Vec<S>) -> Result<()> {
        self.basis.clear();
        self.h = DenseMatrix::zeros(0, 0);
        self.g = DenseMatrix::zeros(0, 0);
        if !self.append(ops, cur.x.v.clone()) {
            return Err(Error::DegenerateSubspace("iterate has zero M-norm"));
        }
        self.append(ops, w);
        if let Some(px) = self.prev_x.as_ref() {
            let mut p = cur.x.v.clone();
            axpy(-S::one(), &px.v, &mut p);
            self.append(ops, p);
        }
        Ok(())
    }
}

impl<S: Scalar> Stepper<S> for Davidson<S> {
    fn step(&mut self, ops: &mut Ops<'_, S>, cur: &Current<S>, _i: usize, events: &mut Vec<Event>) -> Result<Vec<S>> {
        let w = ops.t(&cur.r);
        if self.basis.is_empty() {
            self.restart(ops, cur, w)?;
        } else if self.basis.len() >= self.max_dim || !self.append(ops, w.clone()) {
            events.push(Event::GdRestart);
            self.restart(ops, cur, w)?;
        }
        self.rebuild_projection();
        let eig = small_dense_eigensolve(&self.h, &self.g)?;
        let y = eig.vectors.col(0);
        let mut x_new = vec![S::zero(); cur.x.v.len()];
        for (c, b) in y.iter().zip(&self.basis) {
            axpy(*c, &b.v, &mut x_new);
        }
        self.prev_x = Some(cur.x.clone());
        Ok(x_new)
    }
}

/// Generalized Davidson: the trial subspace accumulates `x⁽⁰⁾` and every
/// `Tr⁽ʲ⁾`; at `max_dim` vectors it restarts with `{x, Tr, p}`. The iterate
/// is the unit-M-norm Ritz vector.
pub fn solve_gd<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
    max_dim: usize,
) -> Result<SolveResult<S>> {
    let mut cfg = config.clone();
    cfg.gd_max_dim = max_dim;
    let mut st =
        Davidson { max_dim, basis: Vec::new(), h: DenseMatrix::zeros(0, 0), g: DenseMatrix::zeros(0, 0), prev_x: None };
    drive(Method::Gd, pencil, t, x0, &cfg, &mut st)
}
