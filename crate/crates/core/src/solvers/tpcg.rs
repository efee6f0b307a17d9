//! Two-term recurrence PCG eigensolvers and the residual-peak augmentation.

use alloc::vec::Vec;

use super::{
    drive, ritz_ladder, Current, Event, Imaged, Method, Ops, ShiftRule, SolveResult, SolverConfig, Stepper, TpcgFamily,
    TpcgVariant,
};
use crate::error::Result;
use crate::linops::HermitianPencil;
use crate::precond::Preconditioner;
use crate::scalar::Scalar;
use crate::vecops::{axpy, dot, norm2};

use super::lopcg::m_cosine;

/// Residual-peak detector: `flag` 0 → 1 when `ν > factor·ν_min`, 1 → 2 when
/// `ν` has decreased over the last `window` steps, then back to 0 once the
/// augmented step is taken. Armed after `ν` first drops below
/// `activation·ν⁽⁰⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakDetector {
    pub factor: f64,
    pub window: usize,
    pub activation: f64,
    pub flag: u8,
    pub armed: bool,
    pub nu_min: f64,
    nus: Vec<f64>,
}

impl PeakDetector {
    pub fn new(factor: f64, window: usize, activation: f64) -> Self {
        Self { factor, window, activation, flag: 0, armed: false, nu_min: f64::INFINITY, nus: Vec::new() }
    }

    /// Feeds `ν⁽ⁱ⁾`; returns `true` when this step should be augmented.
    /// Transition events are appended to `events`. `is_new_min` reports
    /// whether `ν⁽ⁱ⁾` became the running minimum.
    pub fn observe(&mut self, nu: f64, events: &mut Vec<Event>) -> (bool, bool) {
        self.nus.push(nu);
        let is_new_min = nu < self.nu_min;
        if is_new_min {
            self.nu_min = nu;
        }
        if !self.armed && nu < self.activation * self.nus[0] {
            self.armed = true;
        }
        if !self.armed {
            return (false, is_new_min);
        }
        if self.flag == 0 {
            if nu > self.factor * self.nu_min {
                self.flag = 1;
                events.push(Event::Flag01);
            }
        } else if self.flag == 1 {
            let k = self.nus.len();
            let decreased = k > self.window && (0..self.window).all(|d| self.nus[k - 1 - d] < self.nus[k - 2 - d]);
            if decreased {
                self.flag = 2;
                events.push(Event::Flag12);
                return (true, is_new_min);
            }
        }
        (false, is_new_min)
    }

    /// Called after the augmented step.
    pub fn reset(&mut self, events: &mut Vec<Event>) {
        if self.flag == 2 {
            self.flag = 0;
            events.push(Event::Flag20);
        }
    }
}

struct Tpcg<S> {
    family: TpcgFamily,
    variant: TpcgVariant,
    sigma_fixed: Option<f64>,
    sigma: Option<f64>,
    theta0: f64,
    theta_prev: f64,
    p: Option<Imaged<S>>,
    /// `x⁽ⁱ⁾*M p⁽ⁱ⁾` carried over from the previous projected Gram matrix.
    xmp: Option<S>,
    gamma_prev: f64,
    /// `ι⁽ⁱ⁻¹⁾ T r⁽ⁱ⁻¹⁾` for the Polak–Ribière correction.
    prev_grad: Option<Vec<S>>,
    defects: Vec<f64>,
    peaks: Option<PeakDetector>,
    x_check: Option<Imaged<S>>,
    augment_now: bool,
}

impl<S: Scalar> Tpcg<S> {
    fn new(config: &SolverConfig, augmented: bool) -> Self {
        Self {
            family: config.tpcg_family,
            variant: config.tpcg_variant,
            sigma_fixed: config.sigma_guess,
            sigma: config.sigma_guess,
            theta0: 0.0,
            theta_prev: 0.0,
            p: None,
            xmp: None,
            gamma_prev: 1.0,
            prev_grad: None,
            defects: Vec::new(),
            peaks: augmented
                .then(|| PeakDetector::new(config.peak_factor, config.peak_decrease_window, config.activation)),
            x_check: None,
            augment_now: false,
        }
    }

    fn beta(&self, rule: ShiftRule, theta: f64) -> f64 {
        let sigma = self.sigma.unwrap_or(theta);
        match rule {
            ShiftRule::Extrapolated => ((sigma + theta) / 2.0).max(2.0 * theta - self.theta_prev),
            ShiftRule::Current => theta,
            ShiftRule::Sigma => sigma,
        }
    }
}

impl<S: Scalar> Stepper<S> for Tpcg<S> {
    fn observe(&mut self, cur: &Current<S>, i: usize, events: &mut Vec<Event>) -> Option<f64> {
        if i == 0 {
            self.theta0 = cur.theta;
        } else if i == 1 && self.sigma_fixed.is_none() {
            let s = self.theta0 - 10.0 * (self.theta0 - cur.theta);
            self.sigma = Some(s.min(cur.theta));
        }
        let peaks = self.peaks.as_mut()?;
        let (augment, new_min) = peaks.observe(cur.nu, events);
        if new_min {
            self.x_check = Some(cur.x.clone());
        }
        self.augment_now = augment && self.x_check.is_some();
        self.x_check.as_ref().map(|xc| m_cosine(xc, &cur.x))
    }

    fn step(&mut self, ops: &mut Ops<'_, S>, cur: &Current<S>, _i: usize, events: &mut Vec<Event>) -> Result<Vec<S>> {
        let wt = ops.t(&cur.r);
        let wt = ops.imaged(wt);
        let x = &cur.x;
        let xnorm2 = cur.m_norm * cur.m_norm;
        let theta = cur.theta;

        // New direction p⁽ⁱ⁺¹⁾ and the vector d entering the RRw basis.
        let (p_new, d) = match self.family {
            TpcgFamily::BradburyFletcher | TpcgFamily::PolakRibiere => {
                let iota = 2.0 / xnorm2;
                let gamma = iota * iota * dot(&cur.r, &wt.v).re();
                let grad: Vec<S> = wt.v.iter().map(|e| e.scale(iota)).collect();
                let p_new = match self.p.as_ref() {
                    None => {
                        let mut g = wt.clone();
                        g.scale(S::from_real(iota));
                        g
                    }
                    Some(p) => {
                        let tau = match (self.family, self.prev_grad.as_ref()) {
                            (TpcgFamily::PolakRibiere, Some(pg)) => {
                                (S::from_real(gamma) - dot(&cur.r, pg).scale(iota)).scale(1.0 / self.gamma_prev)
                            }
                            _ => S::from_real(gamma / self.gamma_prev),
                        };
                        Imaged::lincomb(&[(S::from_real(iota), &wt), (tau, p)])
                    }
                };
                self.gamma_prev = gamma;
                self.prev_grad = Some(grad);
                let d = p_new.clone();
                (p_new, d)
            }
            TpcgFamily::Conjugate { alpha, shift } => {
                let p_new = match self.p.as_ref() {
                    None => Some(wt.clone()),
                    Some(p) => {
                        let beta = self.beta(shift, theta);
                        let v = match self.variant {
                            TpcgVariant::Standard => {
                                let xmp = self.xmp.unwrap_or_else(|| dot(&x.v, &p.mv));
                                let c = xmp.scale(alpha / xnorm2);
                                Imaged::lincomb(&[(S::one(), p), (-c, x)])
                            }
                            TpcgVariant::LaggedProjector => p.clone(),
                        };
                        let mut w = v.av.clone();
                        axpy(S::from_real(-beta), &v.mv, &mut w);
                        let den = dot(&w, &v.v);
                        let mut num = dot(&w, &wt.v);
                        let wx = dot(&w, &x.v);
                        if self.variant == TpcgVariant::Standard {
                            if alpha != 1.0 {
                                let xmt = dot(&x.mv, &wt.v);
                                num -= wx * xmt.scale(alpha / xnorm2);
                            }
                            let scale = norm2(&w) * norm2(&x.v);
                            self.defects.push(if scale > 0.0 { wx.abs() / scale } else { 0.0 });
                        }
                        if den == S::zero() || !den.is_finite() || !num.is_finite() {
                            events.push(Event::DirectionRestart);
                            Some(wt.clone())
                        } else {
                            let tau = -(num / den);
                            let base = match self.variant {
                                TpcgVariant::Standard => p,
                                TpcgVariant::LaggedProjector => &v,
                            };
                            Some(Imaged::lincomb(&[(S::one(), &wt), (tau, base)]))
                        }
                    }
                };
                let p_new = p_new.expect("direction is always formed");
                let d = match self.variant {
                    TpcgVariant::Standard => p_new.clone(),
                    TpcgVariant::LaggedProjector => {
                        let c = dot(&x.mv, &p_new.v).scale(1.0 / xnorm2);
                        Imaged::lincomb(&[(S::one(), &p_new), (-c, x)])
                    }
                };
                (p_new, d)
            }
        };

        let augment = self.augment_now;
        self.augment_now = false;
        let out = if augment {
            events.push(Event::Augment);
            let xc = self.x_check.as_ref().expect("augmentation needs a stored iterate");
            let out = ritz_ladder(&[x, &d, xc, &wt], &[&[0, 1, 2], &[0, 1], &[0, 3]], None)?;
            match out.used {
                1 => events.push(Event::Reduce2),
                2 => events.push(Event::FallbackPsd),
                _ => {}
            }
            if let Some(pk) = self.peaks.as_mut() {
                pk.reset(events);
            }
            out
        } else {
            let out = ritz_ladder(&[x, &d, &wt], &[&[0, 1], &[0, 2]], None)?;
            if out.used == 1 {
                events.push(Event::FallbackPsd);
            }
            out
        };

        self.theta_prev = theta;
        let plain = !augment && out.used == 0;
        match out.dir {
            None => {
                events.push(Event::ZeroAnchor);
                self.p = None;
                self.xmp = None;
            }
            Some(dir) if !plain => {
                self.p = Some(dir);
                self.xmp = None;
            }
            Some(_) => {
                let is_standard_conj =
                    matches!(self.family, TpcgFamily::Conjugate { .. }) && self.variant == TpcgVariant::Standard;
                if is_standard_conj {
                    // x⁽ⁱ⁺¹⁾ = x⁽ⁱ⁾ + δp⁽ⁱ⁺¹⁾, so x⁽ⁱ⁺¹⁾*Mp⁽ⁱ⁺¹⁾ = g₀₁ + conj(δ)g₁₁.
                    let delta = out.ritz.coeffs[1];
                    self.xmp = Some(out.gram_m[(0, 1)] + delta.conj() * out.gram_m[(1, 1)]);
                } else {
                    self.xmp = None;
                }
                self.p = Some(match (self.family, self.variant) {
                    (TpcgFamily::Conjugate { .. }, TpcgVariant::LaggedProjector) => d,
                    _ => p_new,
                });
            }
        }
        Ok(out.x_new)
    }

    fn rescale(&mut self, s: f64) {
        if let Some(xc) = self.x_check.as_mut() {
            xc.scale(S::from_real(s));
        }
        match self.family {
            TpcgFamily::Conjugate { .. } => {
                if let Some(p) = self.p.as_mut() {
                    p.scale(S::from_real(s));
                }
                if let Some(xmp) = self.xmp.as_mut() {
                    *xmp = xmp.scale(s * s);
                }
            }
            TpcgFamily::BradburyFletcher | TpcgFamily::PolakRibiere => {
                // ι ∝ ‖x‖⁻², so the direction scales inversely with x.
                if let Some(p) = self.p.as_mut() {
                    p.scale(S::from_real(1.0 / s));
                }
                if let Some(g) = self.prev_grad.as_mut() {
                    for e in g.iter_mut() {
                        *e = e.scale(1.0 / s);
                    }
                }
                self.gamma_prev /= s * s;
            }
        }
    }

    fn orthogonality_defects(&mut self) -> Vec<f64> {
        core::mem::take(&mut self.defects)
    }
}

/// TPCG: `p⁽ⁱ⁺¹⁾ = ι Tr⁽ⁱ⁾ + τ p⁽ⁱ⁾` by the configured family, then RRw over
/// `{x, p⁽ⁱ⁺¹⁾}` (or `{x, Q⁽ⁱ⁾p⁽ⁱ⁺¹⁾}` with the lagged projector).
pub fn solve_tpcg<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    let mut st = Tpcg::new(config, false);
    drive(Method::Tpcg, pencil, t, x0, config, &mut st)
}

/// TPCG augmented by the minimum-residual iterate `x̌` whenever the residual
/// norm passes a peak. After an augmented step the direction restarts from
/// `x⁽ⁱ⁺¹⁾ − x⁽ⁱ⁾`.
pub fn solve_tpcga<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    let mut st = Tpcg::new(config, true);
    drive(Method::Tpcga, pencil, t, x0, config, &mut st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn peak_trace_example() {
        let mut pd = PeakDetector::new(1.5, 1, 1.0);
        // activation 1.0 arms as soon as ν < ν⁽⁰⁾.
        let mut ev = vec![];
        assert_eq!(pd.observe(1.0, &mut ev), (false, true));
        assert_eq!(pd.observe(0.5, &mut ev), (false, true));
        assert_eq!(pd.observe(0.9, &mut ev), (false, false));
        assert_eq!(ev, vec![Event::Flag01]);
        assert_eq!(pd.observe(0.8, &mut ev), (true, false));
        assert_eq!(ev, vec![Event::Flag01, Event::Flag12]);
        pd.reset(&mut ev);
        assert_eq!(pd.flag, 0);
    }

    #[test]
    fn monotone_trace_never_flags() {
        let mut pd = PeakDetector::new(1.5, 1, 0.1);
        let mut ev = vec![];
        for k in 0..50 {
            assert!(!pd.observe(0.8f64.powi(k), &mut ev).0);
        }
        assert!(ev.is_empty());
    }

    #[test]
    fn window_requires_consecutive_decreases() {
        let mut pd = PeakDetector::new(1.5, 3, 1.0);
        let mut ev = vec![];
        for nu in [1.0, 0.5, 0.9, 0.8, 0.85, 0.7, 0.6] {
            pd.observe(nu, &mut ev);
        }
        assert_eq!(pd.flag, 1);
        assert!(pd.observe(0.55, &mut ev).0);
    }
}
