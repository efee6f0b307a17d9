//! Single-vector eigensolvers for the smallest eigenpair of `A x = λ M x`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linops::HermitianPencil;
use crate::precond::Preconditioner;
use crate::rayleigh_ritz::{gram_matrices, weighted_ritz, WeightedRitz};
use crate::scalar::{sqrt, Scalar};
use crate::vecops::{all_finite, axpy, dot, is_zero, norm2, scale_real};

mod lopcg;
mod pcg;
mod tpcg;

pub use lopcg::{solve_gd, solve_lopcg, solve_lopcga, solve_lopcgx, solve_psd};
pub use pcg::solve_pcg_heuristic;
pub use tpcg::{solve_tpcg, solve_tpcga};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PcgHeuristic,
    Psd,
    Gd,
    Lopcg,
    Lopcgx,
    Lopcga,
    Tpcg,
    Tpcga,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::PcgHeuristic,
        Method::Psd,
        Method::Gd,
        Method::Lopcg,
        Method::Lopcgx,
        Method::Lopcga,
        Method::Tpcg,
        Method::Tpcga,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PcgHeuristic => "pcg-heuristic",
            Method::Psd => "psd",
            Method::Gd => "gd",
            Method::Lopcg => "lopcg",
            Method::Lopcgx => "lopcgx",
            Method::Lopcga => "lopcga",
            Method::Tpcg => "tpcg",
            Method::Tpcga => "tpcga",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown method '{s}'")))
    }
}

/// Shift `β` used by the conjugate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRule {
    /// `β = max{(σ+λ⁽ⁱ⁾)/2, 2λ⁽ⁱ⁾ − λ⁽ⁱ⁻¹⁾}`
    Extrapolated,
    /// `β = λ⁽ⁱ⁾`
    Current,
    /// `β = σ`
    Sigma,
}

/// Coefficient family of the two-term recurrence `p' = ι Tr + τ p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TpcgFamily {
    BradburyFletcher,
    PolakRibiere,
    /// `τ = −(p*B Tr)/(p*B p)` with `B = Q_α*(A − βM)Q_α`.
    Conjugate {
        alpha: f64,
        shift: ShiftRule,
    },
}

impl TpcgFamily {
    pub const JACOBI: Self = Self::Conjugate { alpha: 1.0, shift: ShiftRule::Extrapolated };
    pub const DANIEL: Self = Self::Conjugate { alpha: 2.0, shift: ShiftRule::Current };
    pub const PERDON_GAMBOLATI: Self = Self::Conjugate { alpha: 0.0, shift: ShiftRule::Sigma };

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "bradbury-fletcher" => Self::BradburyFletcher,
            "polak-ribiere" => Self::PolakRibiere,
            "jacobi" | "jacobi-shift" => Self::JACOBI,
            "daniel" => Self::DANIEL,
            "perdon-gambolati" => Self::PERDON_GAMBOLATI,
            _ => return Err(Error::InvalidInput(alloc::format!("unknown TPCG family '{s}'"))),
        })
    }
}

/// Where the conjugate family applies its projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpcgVariant {
    /// `v = Q⁽ⁱ⁾p⁽ⁱ⁾`, RRw over `{x, p⁽ⁱ⁺¹⁾}`.
    Standard,
    /// `v = Q⁽ⁱ⁻¹⁾p⁽ⁱ⁾`, RRw over `{x, Q⁽ⁱ⁾p⁽ⁱ⁺¹⁾}`.
    LaggedProjector,
}

/// Solver settings. `Default` gives the documented defaults with LOPCG.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub tpcg_family: TpcgFamily,
    pub tpcg_variant: TpcgVariant,
    /// Cosine threshold for the auxiliary-vector update.
    pub tau_angle: f64,
    /// Gram-diagonal reduction threshold.
    pub gamma_gram: f64,
    /// Residual peak factor over `ν_min`.
    pub peak_factor: f64,
    /// Number of consecutive decreases of `ν` that end a peak.
    pub peak_decrease_window: usize,
    /// Augmentation is armed once `ν < activation·ν⁽⁰⁾`.
    pub activation: f64,
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Lower bound `σ < λ₁` for the shift rule; derived after the first step when absent.
    pub sigma_guess: Option<f64>,
    /// Rescale to unit M-norm every this many steps (0 disables).
    pub normalize_every: usize,
    /// `λ₁` input of the heuristic PCG.
    pub lambda1_input: Option<f64>,
    /// Heuristic PCG: once `ν` falls below this level, replace `λ₁` by `λ⁽ⁱ⁾`.
    pub lambda1_update_below: Option<f64>,
    /// Reference `λ₁` for the `theta_err` column.
    pub lambda1_reference: Option<f64>,
    pub gd_max_dim: usize,
    /// Retain every iterate in the result.
    pub keep_iterates: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Lopcg,
            tpcg_family: TpcgFamily::JACOBI,
            tpcg_variant: TpcgVariant::LaggedProjector,
            tau_angle: 0.7,
            gamma_gram: crate::rayleigh_ritz::DEFAULT_GAMMA,
            peak_factor: 1.5,
            peak_decrease_window: 1,
            activation: 0.1,
            tol_residual: 1e-10,
            max_iters: 1000,
            sigma_guess: None,
            normalize_every: 10,
            lambda1_input: None,
            lambda1_update_below: None,
            lambda1_reference: None,
            gd_max_dim: 64,
            keep_iterates: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(alloc::format!("{what} must be positive and finite")))
            }
        };
        pos(self.tol_residual, "tol_residual")?;
        pos(self.peak_factor, "peak_factor")?;
        pos(self.activation, "activation")?;
        if !(self.tau_angle >= 0.0) {
            return Err(Error::InvalidInput("tau_angle must be non-negative".into()));
        }
        if !(self.gamma_gram > 1.0) {
            return Err(Error::InvalidInput("gamma_gram must exceed 1".into()));
        }
        if self.peak_decrease_window == 0 {
            return Err(Error::InvalidInput("peak_decrease_window must be at least 1".into()));
        }
        if self.gd_max_dim < 3 || self.gd_max_dim > 64 {
            return Err(Error::InvalidInput("gd_max_dim must lie in 3..=64".into()));
        }
        if let TpcgFamily::Conjugate { alpha, .. } = self.tpcg_family {
            if !alpha.is_finite() {
                return Err(Error::InvalidInput("alpha must be finite".into()));
            }
            if alpha != 1.0
                && self.tpcg_variant == TpcgVariant::LaggedProjector
                && matches!(self.method, Method::Tpcg | Method::Tpcga)
            {
                return Err(Error::InvalidInput("the lagged projector is defined for alpha = 1 only".into()));
            }
        }
        if self.method == Method::PcgHeuristic && self.lambda1_input.is_none() {
            return Err(Error::InvalidInput("pcg-heuristic needs lambda1_input".into()));
        }
        Ok(())
    }
}

/// Notable things that happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Trial subspace augmented by the stored minimum-residual iterate.
    Augment,
    /// Auxiliary vector replaced by the current iterate.
    AuxUpdate,
    /// Basis reduced to `{x, w}` by the Gram rule.
    Reduce2,
    /// Basis reduced to `{x, w, p}` by the Gram rule.
    Reduce3,
    /// Ill-conditioned basis; fell back to a steepest-descent step.
    FallbackPsd,
    /// Minimizer had no component on `x`; unweighted Ritz vector used.
    ZeroAnchor,
    /// Conjugation denominator vanished; direction restarted.
    DirectionRestart,
    GdRestart,
    Flag01,
    Flag12,
    Flag20,
    Lambda1Update,
}

impl Event {
    pub const ALL: [Event; 12] = [
        Event::Augment,
        Event::AuxUpdate,
        Event::Reduce2,
        Event::Reduce3,
        Event::FallbackPsd,
        Event::ZeroAnchor,
        Event::DirectionRestart,
        Event::GdRestart,
        Event::Flag01,
        Event::Flag12,
        Event::Flag20,
        Event::Lambda1Update,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Event::Augment => "augment",
            Event::AuxUpdate => "aux-update",
            Event::Reduce2 => "reduce-2",
            Event::Reduce3 => "reduce-3",
            Event::FallbackPsd => "fallback-psd",
            Event::ZeroAnchor => "zero-anchor",
            Event::DirectionRestart => "direction-restart",
            Event::GdRestart => "gd-restart",
            Event::Flag01 => "flag-0-1",
            Event::Flag12 => "flag-1-2",
            Event::Flag20 => "flag-2-0",
            Event::Lambda1Update => "lambda1-update",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Event {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Event::ALL
            .into_iter()
            .find(|e| e.token() == s)
            .ok_or_else(|| Error::InvalidInput(alloc::format!("unknown event '{s}'")))
    }
}

/// State at iteration `iter` plus the events of the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub theta: f64,
    pub theta_err: Option<f64>,
    pub nu: f64,
    pub phi: Option<f64>,
    pub delta_lambda: Option<f64>,
    pub delta_phi: Option<f64>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
    pub fn thetas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.theta).collect()
    }
    pub fn nus(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.nu).collect()
    }
    /// First iteration with `ν ≤ tol`.
    pub fn steps_to(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.nu <= tol).map(|r| r.iter)
    }
    /// `(iter, event)` pairs in order.
    pub fn events(&self) -> Vec<(usize, Event)> {
        self.records.iter().flat_map(|r| r.events.iter().map(move |e| (r.iter, *e))).collect()
    }
}

/// Operator applications performed by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatvecCounts {
    pub a: usize,
    pub m: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<S> {
    pub method: Method,
    pub theta_final: f64,
    /// Final iterate scaled to unit M-norm.
    pub x_final: Vec<S>,
    pub nu_final: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: ConvergenceHistory,
    pub counts: MatvecCounts,
    /// Every iterate `x⁽ⁱ⁾` when `keep_iterates` is set.
    pub iterates: Option<Vec<Vec<S>>>,
    /// Conjugate family, standard variant: `|w*x⁽ⁱ⁾|/(‖w‖‖x⁽ⁱ⁾‖)` per step.
    pub orthogonality_defects: Vec<f64>,
}

impl<S> SolveResult<S> {
    pub fn events(&self) -> Vec<(usize, Event)> {
        self.history.events()
    }
}

/// Runs the method selected in `config`. The heuristic PCG takes `λ₁` from
/// `config.lambda1_input`.
pub fn solve<S: Scalar>(
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
) -> Result<SolveResult<S>> {
    match config.method {
        Method::PcgHeuristic => {
            let l1 =
                config.lambda1_input.ok_or_else(|| Error::InvalidInput("pcg-heuristic needs lambda1_input".into()))?;
            solve_pcg_heuristic(pencil, t, l1, x0, config)
        }
        Method::Psd => solve_psd(pencil, t, x0, config),
        Method::Gd => solve_gd(pencil, t, x0, config, config.gd_max_dim),
        Method::Lopcg => solve_lopcg(pencil, t, x0, config),
        Method::Lopcgx => solve_lopcgx(pencil, t, x0, config),
        Method::Lopcga => solve_lopcga(pencil, t, x0, config),
        Method::Tpcg => solve_tpcg(pencil, t, x0, config),
        Method::Tpcga => solve_tpcga(pencil, t, x0, config),
    }
}

/// Counting wrapper around the three operators.
pub(crate) struct Ops<'a, S> {
    pub pencil: &'a HermitianPencil<S>,
    pub t: &'a Preconditioner<S>,
    pub counts: MatvecCounts,
}

impl<'a, S: Scalar> Ops<'a, S> {
    pub fn new(pencil: &'a HermitianPencil<S>, t: &'a Preconditioner<S>) -> Result<Self> {
        if t.dim() != pencil.dim() {
            return Err(Error::DimensionMismatch { expected: pencil.dim(), found: t.dim() });
        }
        Ok(Self { pencil, t, counts: MatvecCounts::default() })
    }
    pub fn a(&mut self, v: &[S]) -> Vec<S> {
        self.counts.a += 1;
        self.pencil.a().apply(v)
    }
    pub fn m(&mut self, v: &[S]) -> Vec<S> {
        self.counts.m += 1;
        self.pencil.m().apply(v)
    }
    pub fn t(&mut self, v: &[S]) -> Vec<S> {
        self.counts.t += 1;
        self.t.apply(v)
    }
    /// `v` with fresh A- and M-images.
    pub fn imaged(&mut self, v: Vec<S>) -> Imaged<S> {
        let av = self.a(&v);
        let mv = self.m(&v);
        Imaged { v, av, mv }
    }
}

/// A vector carried together with its A- and M-images.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Imaged<S> {
    pub v: Vec<S>,
    pub av: Vec<S>,
    pub mv: Vec<S>,
}

impl<S: Scalar> Imaged<S> {
    pub fn scale(&mut self, s: S) {
        for part in [&mut self.v, &mut self.av, &mut self.mv] {
            for e in part.iter_mut() {
                *e *= s;
            }
        }
    }

    pub fn lincomb(terms: &[(S, &Imaged<S>)]) -> Imaged<S> {
        let n = terms[0].1.v.len();
        let mut out = Imaged { v: vec![S::zero(); n], av: vec![S::zero(); n], mv: vec![S::zero(); n] };
        for (c, im) in terms {
            axpy(*c, &im.v, &mut out.v);
            axpy(*c, &im.av, &mut out.av);
            axpy(*c, &im.mv, &mut out.mv);
        }
        out
    }

    pub fn m_norm(&self) -> f64 {
        sqrt(dot(&self.v, &self.mv).re().max(0.0))
    }
}

/// Iterate with its Rayleigh quotient and residual.
#[derive(Debug, Clone)]
pub(crate) struct Current<S> {
    pub x: Imaged<S>,
    pub theta: f64,
    pub r: Vec<S>,
    pub nu: f64,
    pub m_norm: f64,
}

impl<S: Scalar> Current<S> {
    pub fn new(x: Imaged<S>) -> Result<Self> {
        let xmx = dot(&x.v, &x.mv).re();
        if !(xmx > 0.0) || !xmx.is_finite() {
            return Err(Error::Breakdown(alloc::format!("iterate has M-norm^2 {xmx:e}")));
        }
        let theta = dot(&x.v, &x.av).re() / xmx;
        let mut r = x.av.clone();
        axpy(S::from_real(-theta), &x.mv, &mut r);
        let m_norm = sqrt(xmx);
        let nu = norm2(&r) / m_norm;
        if !theta.is_finite() || !nu.is_finite() {
            return Err(Error::Breakdown("non-finite Rayleigh quotient or residual".into()));
        }
        Ok(Self { x, theta, r, nu, m_norm })
    }

    pub fn rescale(&mut self, s: f64) {
        self.x.scale(S::from_real(s));
        scale_real(s, &mut self.r);
        self.m_norm *= s;
    }
}

pub(crate) fn check_start<S: Scalar>(pencil: &HermitianPencil<S>, x0: &[S], config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if x0.len() != pencil.dim() {
        return Err(Error::DimensionMismatch { expected: pencil.dim(), found: x0.len() });
    }
    if !all_finite(x0) {
        return Err(Error::NonFinite("initial vector"));
    }
    if is_zero(x0) {
        return Err(Error::InvalidInput("initial vector is zero".into()));
    }
    Ok(())
}

/// One method's step logic on top of the shared driver.
pub(crate) trait Stepper<S: Scalar> {
    /// Inspects the current iterate before it is recorded; returns `φ⁽ⁱ⁾`.
    fn observe(&mut self, _cur: &Current<S>, _i: usize, _events: &mut Vec<Event>) -> Option<f64> {
        None
    }
    /// Produces `x⁽ⁱ⁺¹⁾` (vector only; the driver computes fresh images).
    fn step(&mut self, ops: &mut Ops<'_, S>, cur: &Current<S>, i: usize, events: &mut Vec<Event>) -> Result<Vec<S>>;
    /// The iterate was rescaled by `s`.
    fn rescale(&mut self, _s: f64) {}
    fn orthogonality_defects(&mut self) -> Vec<f64> {
        Vec::new()
    }
}

pub(crate) struct Recorder {
    config_ref: Option<f64>,
    pub history: ConvergenceHistory,
}

impl Recorder {
    pub fn new(config: &SolverConfig) -> Self {
        Self { config_ref: config.lambda1_reference, history: ConvergenceHistory::default() }
    }

    pub fn push(&mut self, iter: usize, theta: f64, nu: f64, phi: Option<f64>, events: Vec<Event>) {
        let prev = self.history.records.last();
        let delta_lambda = prev.and_then(|p| {
            let q = theta / p.theta - 1.0;
            q.is_finite().then(|| sqrt(q.abs()))
        });
        let delta_phi = match (prev.and_then(|p| p.phi), phi) {
            (Some(a), Some(b)) => {
                let q = b / a - 1.0;
                q.is_finite().then(|| q.abs())
            }
            _ => None,
        };
        self.history.records.push(IterationRecord {
            iter,
            theta,
            theta_err: self.config_ref.map(|l| theta - l),
            nu,
            phi,
            delta_lambda,
            delta_phi,
            events,
        });
    }
}

/// Shared loop for every Rayleigh–Ritz based method.
pub(crate) fn drive<S: Scalar, St: Stepper<S>>(
    method: Method,
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    x0: &[S],
    config: &SolverConfig,
    stepper: &mut St,
) -> Result<SolveResult<S>> {
    check_start(pencil, x0, config)?;
    let mut ops = Ops::new(pencil, t)?;
    let x = ops.imaged(x0.to_vec());
    let mut cur = Current::new(x)?;
    let mut rec = Recorder::new(config);
    let mut iterates = config.keep_iterates.then(Vec::new);
    let mut i = 0usize;
    let converged = loop {
        let mut events = Vec::new();
        let phi = stepper.observe(&cur, i, &mut events);
        if let Some(its) = iterates.as_mut() {
            its.push(cur.x.v.clone());
        }
        if cur.nu <= config.tol_residual {
            rec.push(i, cur.theta, cur.nu, phi, events);
            break true;
        }
        if i >= config.max_iters {
            rec.push(i, cur.theta, cur.nu, phi, events);
            break false;
        }
        let x_next = stepper.step(&mut ops, &cur, i, &mut events)?;
        if !all_finite(&x_next) {
            return Err(Error::Breakdown("non-finite iterate".into()));
        }
        let eventful = !events.is_empty();
        rec.push(i, cur.theta, cur.nu, phi, events);
        let x = ops.imaged(x_next);
        cur = Current::new(x)?;
        i += 1;
        if (config.normalize_every > 0 && i.is_multiple_of(config.normalize_every)) || eventful {
            let s = 1.0 / cur.m_norm;
            cur.rescale(s);
            stepper.rescale(s);
        }
    };
    let mut x_final = cur.x.v.clone();
    scale_real(1.0 / cur.m_norm, &mut x_final);
    Ok(SolveResult {
        method,
        theta_final: cur.theta,
        x_final,
        nu_final: cur.nu,
        iterations: i,
        converged,
        history: rec.history,
        counts: ops.counts,
        iterates,
        orthogonality_defects: stepper.orthogonality_defects(),
    })
}

/// Outcome of a Rayleigh–Ritz step over one of several candidate subsets.
pub(crate) struct RitzStep<S> {
    pub x_new: Vec<S>,
    /// `x_new − x` with images; `None` when the anchor weight vanished.
    pub dir: Option<Imaged<S>>,
    /// Index into the candidate list of the subset that succeeded.
    pub used: usize,
    pub ritz: WeightedRitz<S>,
    pub gram_m: DenseMatrix<S>,
}

/// Tries each subset of `basis` (all starting with the anchor at index 0) in
/// order until the projected eigenproblem is well conditioned. `anchor`
/// gives the x-coefficient of each basis vector for an orthogonalized basis.
pub(crate) fn ritz_ladder<S: Scalar>(
    basis: &[&Imaged<S>],
    subsets: &[&[usize]],
    anchor: Option<&[S]>,
) -> Result<RitzStep<S>> {
    let mut last_err = Error::DegenerateSubspace("no candidate subset");
    for (used, subset) in subsets.iter().enumerate() {
        debug_assert_eq!(subset[0], 0);
        let vs: Vec<&[S]> = subset.iter().map(|&j| basis[j].v.as_slice()).collect();
        let avs: Vec<&[S]> = subset.iter().map(|&j| basis[j].av.as_slice()).collect();
        let mvs: Vec<&[S]> = subset.iter().map(|&j| basis[j].mv.as_slice()).collect();
        let (ga, gm) = gram_matrices(&vs, &avs, &mvs)?;
        let anc: Option<Vec<S>> = anchor.map(|s| subset.iter().map(|&j| s[j]).collect());
        match weighted_ritz(&ga, &gm, anc.as_deref()) {
            Ok(ritz) => {
                let c = &ritz.coeffs;
                let mut x_new = vec![S::zero(); vs[0].len()];
                for (cj, v) in c.iter().zip(&vs) {
                    axpy(*cj, v, &mut x_new);
                }
                let dir = if ritz.zero_anchor {
                    None
                } else {
                    // x_new − x = (c₀ − 1)x + Σ_{j≥1} c_j v_j, where c₀ − 1 is
                    // formed without cancellation from the anchor weights.
                    let c0m1 = match &anc {
                        None => c[0] - S::one(),
                        Some(s) => {
                            let mut acc = S::zero();
                            for j in 1..c.len() {
                                acc -= s[j] * c[j];
                            }
                            acc
                        }
                    };
                    let mut terms: Vec<(S, &Imaged<S>)> = vec![(c0m1, basis[subset[0]])];
                    for (k, &j) in subset.iter().enumerate().skip(1) {
                        terms.push((c[k], basis[j]));
                    }
                    Some(Imaged::lincomb(&terms))
                };
                return Ok(RitzStep { x_new, dir, used, ritz, gram_m: gm });
            }
            Err(e @ Error::Conditioning { .. }) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::HermitianOperator;

    fn diag_pencil(n: usize) -> HermitianPencil<f64> {
        let d: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64).collect();
        let a = HermitianOperator::from_real_diagonal(&d).unwrap();
        HermitianPencil::standard(a)
    }

    fn mild_precond(n: usize) -> Preconditioner<f64> {
        let d: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + 0.3 * i as f64)).collect();
        let t = HermitianOperator::from_real_diagonal(&d).unwrap();
        Preconditioner::from_dense(t.to_dense()).unwrap()
    }

    fn start(n: usize) -> Vec<f64> {
        (0..n).map(|i| 1.0 + 0.1 * (i % 7) as f64).collect()
    }

    #[test]
    fn every_method_finds_the_smallest_eigenvalue() {
        let n = 60;
        let pencil = diag_pencil(n);
        let t = mild_precond(n);
        let x0 = start(n);
        for m in Method::ALL {
            let mut cfg = SolverConfig::with_method(m);
            cfg.tol_residual = 1e-9;
            cfg.max_iters = 2000;
            cfg.lambda1_input = Some(1.0);
            let res = solve(&pencil, &t, &x0, &cfg).unwrap();
            assert!(res.converged, "{m} did not converge: nu = {:e}", res.nu_final);
            assert!((res.theta_final - 1.0).abs() < 1e-12, "{m}: theta = {}", res.theta_final);
            assert!(res.counts.a <= 2 * (res.iterations + 1) + 1, "{m}: {} A-applies", res.counts.a);
        }
    }

    #[test]
    fn every_tpcg_family_converges() {
        let n = 60;
        let pencil = diag_pencil(n);
        let t = mild_precond(n);
        let x0 = start(n);
        for fam in ["bradbury-fletcher", "polak-ribiere", "jacobi", "daniel", "perdon-gambolati"] {
            for variant in [TpcgVariant::Standard, TpcgVariant::LaggedProjector] {
                let family = TpcgFamily::from_name(fam).unwrap();
                if variant == TpcgVariant::LaggedProjector
                    && !matches!(family, TpcgFamily::Conjugate { alpha, .. } if alpha == 1.0)
                {
                    continue;
                }
                let mut cfg = SolverConfig::with_method(Method::Tpcg);
                cfg.tpcg_family = family;
                cfg.tpcg_variant = variant;
                cfg.tol_residual = 1e-9;
                cfg.max_iters = 3000;
                let res = solve(&pencil, &t, &x0, &cfg).unwrap();
                assert!(res.converged, "{fam}/{variant:?}: nu = {:e}", res.nu_final);
                assert!((res.theta_final - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_theta_is_monotone() {
        let n = 40;
        let pencil = diag_pencil(n);
        let t = mild_precond(n);
        let mut cfg = SolverConfig::with_method(Method::Psd);
        cfg.max_iters = 200;
        let res = solve(&pencil, &t, &start(n), &cfg).unwrap();
        let th = res.history.thetas();
        for w in th.windows(2) {
            assert!(w[1] <= w[0] + 1e-14 * w[0].abs());
        }
    }

    #[test]
    fn eigenvector_start_converges_immediately() {
        let n = 10;
        let pencil = diag_pencil(n);
        let t = Preconditioner::identity(n);
        let mut x0 = vec![0.0; n];
        x0[0] = 3.0;
        let res = solve(&pencil, &t, &x0, &SolverConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert!((res.x_final[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn heuristic_pcg_breaks_down_above_lambda1() {
        let n = 30;
        let pencil = diag_pencil(n);
        let t = Preconditioner::identity(n);
        let cfg = SolverConfig::with_method(Method::PcgHeuristic);
        let err = solve_pcg_heuristic(&pencil, &t, 1.5, &start(n), &cfg).unwrap_err();
        assert!(matches!(err, Error::Breakdown(_)));
    }

    #[test]
    fn event_tokens_round_trip() {
        for tok in [
            "augment",
            "aux-update",
            "reduce-2",
            "reduce-3",
            "fallback-psd",
            "zero-anchor",
            "direction-restart",
            "gd-restart",
            "flag-0-1",
            "flag-1-2",
            "flag-2-0",
            "lambda1-update",
        ] {
            let e: Event = tok.parse().unwrap();
            assert_eq!(e.token(), tok);
        }
        assert!("bogus".parse::<Event>().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
