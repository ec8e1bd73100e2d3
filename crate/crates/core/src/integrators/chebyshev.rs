//! Stabilization constants of the Chebyshev-based local time-stepping scheme.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevConstants {
    pub p: usize,
    pub nu: f64,
    /// `δ = 1 + ν / p²`.
    pub delta: f64,
    /// `ω = 2 T_p'(δ) / T_p(δ)`.
    pub omega: f64,
    /// `β_k = T_{k-1}(δ) / T_{k+1}(δ)`, `k = 1..p-1`.
    pub beta_int: Vec<f64>,
    /// `β_{k+1/2} = T_k(δ) / T_{k+1}(δ)`, `k = 1..p-1`.
    pub beta_half: Vec<f64>,
}

pub fn chebyshev_constants(p: usize, nu: f64) -> Result<ChebyshevConstants> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::invalid(format!(
            "stabilization parameter {nu} outside [0, 1]"
        )));
    }
    let delta = 1.0 + nu / (p * p) as f64;
    let mut c = ChebyshevConstants::with_delta(p, delta)?;
    c.nu = nu;
    Ok(c)
}

impl ChebyshevConstants {
    /// Constants for a prescribed `δ ≥ 1`; `nu` is back-computed from it.
    pub fn with_delta(p: usize, delta: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid(
                "the number of local steps must be at least 1",
            ));
        }
        if !(delta >= 1.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be >= 1, got {delta}")));
        }
        // T_0..T_p and U_0..U_{p-1} by the three-term recurrence
        let mut t = vec![1.0, delta];
        let mut u = vec![1.0, 2.0 * delta];
        for k in 1..p {
            t.push(2.0 * delta * t[k] - t[k - 1]);
            u.push(2.0 * delta * u[k] - u[k - 1]);
        }
        let omega = 2.0 * (p as f64) * u[p - 1] / t[p];
        let beta_int = (1..p).map(|k| t[k - 1] / t[k + 1]).collect();
        let beta_half = (1..p).map(|k| t[k] / t[k + 1]).collect();
        Ok(Self {
            p,
            nu: (delta - 1.0) * (p * p) as f64,
            delta,
            omega,
            beta_int,
            beta_half,
        })
    }

    /// `2 (1 + 1/T_p(δ))`: bound on `dt² λ` of the effective LTS operator over
    /// modes inside the local stability interval. Equals 4 when `ν = 0`.
    pub fn effective_ceiling(&self) -> f64 {
        let (mut t_prev, mut t) = (1.0, self.delta);
        for _ in 1..self.p {
            (t_prev, t) = (t, 2.0 * self.delta * t - t_prev);
        }
        2.0 * (1.0 + 1.0 / t)
    }

    /// Factor `2p² / (ω δ)` of the first local step; 1 when `ν = 0`.
    pub fn first_step_factor(&self) -> f64 {
        2.0 * (self.p * self.p) as f64 / (self.omega * self.delta)
    }
}
