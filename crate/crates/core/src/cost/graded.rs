//! Costs on meshes graded toward a reentrant corner, and asymptotic rates.

use crate::error::{Error, Result};

/// One leapfrog solve on an `m`-layer mesh with grading `s` in dimension `d`: `m^{s+d}`.
pub fn graded_cost_lf(m: u64, s: f64, d: u32) -> f64 {
    (m as f64).powf(s + d as f64)
}

/// One LTS solve with the inner `q` layers treated as fine.
pub fn graded_cost_lts(m: u64, s: f64, d: u32, q: u64) -> Result<f64> {
    if q < 1 || q > m {
        return Err(Error::invalid(format!(
            "fine layer count {q} outside [1, {m}]"
        )));
    }
    let (m, q) = (m as f64, q as f64);
    let d = d as i32;
    let jump = (q + 1.0).powf(s) - q.powf(s);
    Ok((m.powf(s + d as f64) + m.powf(s) * q.powi(d) * (jump - 1.0)) / jump)
}

/// Integer minimizer of [`graded_cost_lts`] over `q ∈ [1, m]`; the smallest
/// one on ties.
pub fn optimal_q(m: u64, s: f64, d: u32) -> Result<u64> {
    if m < 1 || !(s >= 1.0) {
        return Err(Error::invalid(format!(
            "need m >= 1 and s >= 1, got m = {m}, s = {s}"
        )));
    }
    let mut best = (1, graded_cost_lts(m, s, d, 1)?);
    for q in 2..=m {
        let c = graded_cost_lts(m, s, d, q)?;
        // relative slack keeps the constant-cost case at q = 1
        if c < best.1 * (1.0 - 1e-12) {
            best = (q, c);
        }
    }
    Ok(best.0)
}

/// Level cost growth exponent with leapfrog: `γ = s + d`.
pub fn graded_gamma_lf(s: f64, d: u32) -> f64 {
    s + d as f64
}

/// Level cost growth exponent with LTS at the optimal `q`: `γ = s + d²/(d+s-1)`.
pub fn graded_gamma_lts(s: f64, d: u32) -> f64 {
    let d = d as f64;
    s + d * d / (d + s - 1.0)
}

/// Weak rate `α`, variance rate `β` and cost rate `γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticRates {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AsymptoticRates {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
            return Err(Error::invalid("rates must be positive"));
        }
        if alpha < 0.5 * beta.min(gamma) {
            return Err(Error::invalid(format!(
                "alpha = {alpha} must be at least min(beta, gamma) / 2"
            )));
        }
        Ok(Self { alpha, beta, gamma })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostRegime {
    /// `β > γ`: coarse levels dominate.
    VarianceDominated,
    /// `β = γ`: all levels contribute equally.
    Balanced,
    /// `β < γ`: fine levels dominate.
    CostDominated,
}

impl CostRegime {
    pub fn label(&self) -> &'static str {
        match self {
            CostRegime::VarianceDominated => "beta>gamma",
            CostRegime::Balanced => "beta=gamma",
            CostRegime::CostDominated => "beta<gamma",
        }
    }
}

/// Total cost `O(ε^e |log ε|^{2·[log_squared]})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostExponent {
    pub regime: CostRegime,
    pub eps_exponent: f64,
    pub log_squared: bool,
}

const RATE_TOLERANCE: f64 = 1e-12;

pub fn total_cost_exponent(rates: &AsymptoticRates) -> CostExponent {
    let AsymptoticRates { alpha, beta, gamma } = *rates;
    if (beta - gamma).abs() <= RATE_TOLERANCE * gamma.max(1.0) {
        CostExponent {
            regime: CostRegime::Balanced,
            eps_exponent: -2.0,
            log_squared: true,
        }
    } else if beta > gamma {
        CostExponent {
            regime: CostRegime::VarianceDominated,
            eps_exponent: -2.0,
            log_squared: false,
        }
    } else {
        CostExponent {
            regime: CostRegime::CostDominated,
            eps_exponent: -2.0 - (gamma - beta) / alpha,
            log_squared: false,
        }
    }
}

/// Leapfrog and LTS cost exponents on graded meshes with degree `k`.
pub fn graded_cost_exponents(
    beta: f64,
    s: f64,
    d: u32,
    k: u32,
) -> Result<(CostExponent, CostExponent)> {
    let alpha = (k + 1) as f64;
    let lf = AsymptoticRates::new(alpha, beta, graded_gamma_lf(s, d))?;
    let lts = AsymptoticRates::new(alpha, beta, graded_gamma_lts(s, d))?;
    Ok((total_cost_exponent(&lf), total_cost_exponent(&lts)))
}

/// `x` in `S = O(ε^{-x})` for graded meshes; 0 when both costs scale alike.
pub fn graded_speedup_exponent(beta: f64, s: f64, d: u32, k: u32) -> Result<f64> {
    let (lf, lts) = graded_cost_exponents(beta, s, d, k)?;
    Ok((lts.eps_exponent - lf.eps_exponent).max(0.0))
}
