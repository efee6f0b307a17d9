//! Heuristic PCG: CG on `(A − λ₁M)x = 0` with eigenvalue monitoring.

use alloc::vec::Vec;

use super::{check_start, Current, Event, Method, Ops, Recorder, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::linops::HermitianPencil;
use crate::precond::Preconditioner;
use crate::scalar::Scalar;
use crate::vecops::{axpy, dot, scale_real};

/// `r = −(A − λ₁M)x` from images.
fn linear_residual<S: Scalar>(ax: &[S], mx: &[S], lambda1: f64) -> Vec<S> {
    let mut r: Vec<S> = ax.iter().map(|v| -*v).collect();
    axpy(S::from_real(lambda1), mx, &mut r);
    r
}

/// Runs the two-term CG recurrence for the singular system `A_{λ₁}x = 0`
/// preconditioned by `T`, recording `λ⁽ⁱ⁾ = λ(x⁽ⁱ⁾)` and the eigen-residual.
/// Fails with a breakdown when `w*p ≤ 0`, i.e. `λ₁` exceeds the true one.
pub fn solve_pcg_heuristic<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    lambda1: f64,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    let mut cfg = config.clone();
    cfg.lambda1_input = Some(lambda1);
    check_start(pencil, x0, &cfg)?;
    if !lambda1.is_finite() {
        return Err(Error::NonFinite("lambda1"));
    }
    let mut ops = Ops::new(pencil, t)?;
    let mut lambda1 = lambda1;
    let mut cur = Current::new(ops.imaged(x0.to_vec()))?;
    let mut r = linear_residual(&cur.x.av, &cur.x.mv, lambda1);
    let mut p = ops.t(&r);
    let mut gamma = dot(&p, &r).re();
    let mut rec = Recorder::new(&cfg);
    let mut iterates = cfg.keep_iterates.then(Vec::new);
    let mut pending: Vec<Event> = Vec::new();
    let mut updated = false;
    let mut i = 0usize;

    let converged = loop {
        if let Some(its) = iterates.as_mut() {
            its.push(cur.x.v.clone());
        }
        let events = core::mem::take(&mut pending);
        if cur.nu <= cfg.tol_residual {
            rec.push(i, cur.theta, cur.nu, None, events);
            break true;
        }
        if i >= cfg.max_iters {
            rec.push(i, cur.theta, cur.nu, None, events);
            break false;
        }
        rec.push(i, cur.theta, cur.nu, None, events);

        let ap = ops.a(&p);
        let mp = ops.m(&p);
        let mut w = ap;
        axpy(S::from_real(-lambda1), &mp, &mut w);
        let wp = dot(&w, &p).re();
        if !(wp > 0.0) {
            return Err(Error::Breakdown(alloc::format!(
                "w*p = {wp:e} at step {i}; the shifted operator is not positive semidefinite"
            )));
        }
        let delta = gamma / wp;
        let mut x = cur.x.v;
        axpy(S::from_real(delta), &p, &mut x);
        axpy(S::from_real(-delta), &w, &mut r);
        cur = Current::new(ops.imaged(x))?;
        i += 1;

        if let Some(level) = cfg.lambda1_update_below {
            if cur.nu <= level {
                lambda1 = cur.theta;
                r = linear_residual(&cur.x.av, &cur.x.mv, lambda1);
                if !updated {
                    pending.push(Event::Lambda1Update);
                    updated = true;
                }
            }
        }

        let z = ops.t(&r);
        let gamma_next = dot(&z, &r).re();
        let beta = S::from_real(gamma_next / gamma);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = *zi + beta * *pi;
        }
        gamma = gamma_next;
    };

    let mut x_final = cur.x.v.clone();
    scale_real(1.0 / cur.m_norm, &mut x_final);
    Ok(SolveResult {
        method: Method::PcgHeuristic,
        theta_final: cur.theta,
        x_final,
        nu_final: cur.nu,
        iterations: i,
        converged,
        history: rec.history,
        counts: ops.counts,
        iterates,
        orthogonality_defects: Vec::new(),
    })
}
