//! Convergence bounds for the heuristic PCG and PSD, and the asymptotic
//! diagnostics for LOPCG-type runs.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linops::{rayleigh_quotient, residual, HermitianPencil};
use crate::precond::Preconditioner;
use crate::rayleigh_ritz::{rrw, BasisRole, TrialBasis};
use crate::scalar::{acosh, cosh, sqrt, Scalar};
use crate::solvers::SolveResult;
use crate::vecops::is_zero;

/// Spectral data entering the bounds. For an interior estimate at index
/// `j`, `lambda1` and `lambda2` hold `λ_j` and `λ_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub j: Option<usize>,
}

impl BoundInputs {
    pub fn new(lambda1: f64, lambda2: f64, lambda_n: f64, sigma: f64, kappa: f64) -> Result<Self> {
        let b = Self { lambda1, lambda2, lambda_n, sigma, kappa, j: None };
        b.validate()?;
        Ok(b)
    }

    pub fn with_index(mut self, j: usize) -> Self {
        self.j = Some(j);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda_n, self.sigma, self.kappa];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bound inputs"));
        }
        if self.lambda2 == self.lambda1 {
            return Err(Error::ClusterDegenerate);
        }
        if !(self.lambda1 < self.lambda2 && self.lambda2 <= self.lambda_n) {
            return Err(Error::InvalidInput("need lambda1 < lambda2 <= lambda_n".into()));
        }
        if !(self.sigma < self.lambda1) {
            return Err(Error::InvalidShift { sigma: self.sigma, lambda1: self.lambda1 });
        }
        if !(self.kappa >= 1.0) {
            return Err(Error::InvalidInput("kappa must be at least 1".into()));
        }
        Ok(())
    }

    /// `η = κ (λ_n−λ₁)(λ₂−σ) / ((λ₂−λ₁)(λ_n−σ))`.
    pub fn eta(&self) -> f64 {
        crate::precond::eta_from(self.kappa, self.lambda1, self.lambda2, self.lambda_n, self.sigma)
    }
}

/// Chebyshev polynomial of the first kind, `C_i(φ)`, by the three-term
/// recurrence.
pub fn chebyshev(i: usize, phi: f64) -> f64 {
    let (mut c0, mut c1) = (1.0, phi);
    if i == 0 {
        return c0;
    }
    for _ in 1..i {
        let c2 = 2.0 * phi * c1 - c0;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// `cosh(i·arccosh φ)` for `φ ≥ 1`.
pub fn chebyshev_hyperbolic(i: usize, phi: f64) -> f64 {
    cosh(i as f64 * acosh(phi))
}

/// `φ = (η+1)/(η−1)`.
pub fn phi_from_eta(eta: f64) -> f64 {
    (eta + 1.0) / (eta - 1.0)
}

/// Upper bound on `λ⁽ⁱ⁾ − λ₁` for the heuristic PCG:
/// `C_i(φ)⁻² · norm_ratio · lam0_err`, with `norm_ratio = ‖x⁽⁰⁾‖²_M/‖x⁽ⁱ⁾‖²_M`
/// (or any upper bound of it).
pub fn pcg_bound(inputs: &BoundInputs, i: usize, lam0_err: f64, norm_ratio: f64) -> Result<f64> {
    inputs.validate()?;
    let eta = inputs.eta();
    if eta < 1.0 {
        return Err(Error::InvalidInput(alloc::format!("eta = {eta} is below 1")));
    }
    if i == 0 {
        return Ok(lam0_err * norm_ratio);
    }
    if eta == 1.0 {
        return Ok(0.0);
    }
    let c = chebyshev(i, phi_from_eta(eta));
    Ok(norm_ratio * lam0_err / (c * c))
}

/// Sharp single-step PSD factor `ξ_j = ((η_j−1)/(η_j+1))²`.
pub fn psd_factor(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let eta = inputs.eta();
    let q = (eta - 1.0) / (eta + 1.0);
    Ok(q * q)
}

/// `ψ² = ((√η−1)/(√η+1))²`.
pub fn average_factor_psi2(eta: f64) -> f64 {
    let s = sqrt(eta);
    let psi = (s - 1.0) / (s + 1.0);
    psi * psi
}

/// `(2ψᵐ/(1+ψ²ᵐ))²`, equal to `C_m(φ)⁻²`.
pub fn multistep_factor_from_psi(eta: f64, m: usize) -> f64 {
    let s = sqrt(eta);
    let psi = (s - 1.0) / (s + 1.0);
    let pm = crate::scalar::powi(psi, m as i32);
    let f = 2.0 * pm / (1.0 + pm * pm);
    f * f
}

/// Per-step diagnostic terms; `None` where a denominator vanished.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AsymptoticTerms {
    pub iter: usize,
    /// `θ⁽ⁱ⁾ − λ₁`.
    pub err: f64,
    /// `λ̃⁽ⁱ⁺²⁾`: one PSD step from `x⁽ⁱ⁺¹⁾`.
    pub psd_theta: f64,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub delta3: Option<f64>,
}

fn inv(v: f64) -> Option<f64> {
    (v != 0.0 && v.is_finite()).then(|| 1.0 / v)
}

fn inv_sqrt(v: f64) -> Option<f64> {
    (v > 0.0 && v.is_finite()).then(|| 1.0 / sqrt(v))
}

/// Residual of the three-step relations along a run:
/// * `δ₁ = (λ⁽ⁱ⁺¹⁾−λ̃⁽ⁱ⁺²⁾)·[(λ⁽ⁱ⁾−λ⁽ⁱ⁺¹⁾)⁻¹ + (λ⁽ⁱ⁺¹⁾−λ⁽ⁱ⁺²⁾)⁻¹] − 1`,
/// * `δ₂` the additive mismatch of the same relation multiplied by
///   `λ⁽ⁱ⁺¹⁾−λ₁` and decreased by one,
/// * `δ₃ = ((λ⁽ⁱ⁾−λ₁)^{-1/2} + (λ⁽ⁱ⁺²⁾−λ₁)^{-1/2} − 2(λ̃⁽ⁱ⁺²⁾−λ₁)^{-1/2})⁻¹`.
///
/// All reported as absolute values. Needs the stored iterates of `run`.
pub fn asymptotic_terms<S: Scalar>(
    run: &SolveResult<S>,
    pencil: &HermitianPencil<S>,
    t: &Preconditioner<S>,
    lambda1: f64,
) -> Result<Vec<AsymptoticTerms>> {
    let its =
        run.iterates.as_ref().ok_or_else(|| Error::InvalidInput("asymptotic terms need stored iterates".into()))?;
    let th: Vec<f64> = its.iter().map(|x| rayleigh_quotient(pencil, x)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..th.len().saturating_sub(2) {
        let x1 = &its[i + 1];
        let r = residual(pencil, x1, th[i + 1])?;
        let w = t.apply(&r);
        if is_zero(&w) {
            continue;
        }
        let basis =
            TrialBasis::new(alloc::vec![(x1.clone(), BasisRole::CurrentIterate), (w, BasisRole::PrecondResidual)])?;
        let tilde = match rrw(pencil, &basis) {
            Ok(o) => o.theta_next,
            Err(Error::Conditioning { .. }) => continue,
            Err(e) => return Err(e),
        };
        let (l0, l1, l2) = (th[i], th[i + 1], th[i + 2]);
        let d1 = match (inv(l0 - l1), inv(l1 - l2)) {
            (Some(a), Some(b)) => Some(((l1 - tilde) * (a + b) - 1.0).abs()),
            _ => None,
        };
        let d2 = match (inv(l0 - l1), inv(l1 - l2), inv(l1 - tilde)) {
            (Some(a), Some(b), Some(c)) => {
                let lhs = (l1 - lambda1) * a + (l2 - lambda1) * b;
                let rhs = (tilde - lambda1) * c;
                Some((lhs - rhs).abs())
            }
            _ => None,
        };
        let d3 = match (inv_sqrt(l0 - lambda1), inv_sqrt(l2 - lambda1), inv_sqrt(tilde - lambda1)) {
            (Some(a), Some(b), Some(c)) => inv(a + b - 2.0 * c).map(f64::abs),
            _ => None,
        };
        out.push(AsymptoticTerms { iter: i, err: l0 - lambda1, psd_theta: tilde, delta1: d1, delta2: d2, delta3: d3 });
    }
    Ok(out)
}
