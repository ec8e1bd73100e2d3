//! Per-level running sums, variance and bias estimators, sample allocation.

use log::warn;

use crate::error::{Error, Result};
use crate::fem::{OutputGrid, QoIVector};
use crate::integrators::MatVecCounts;

/// Running sums of one level.
#[derive(Clone, Debug)]
pub struct LevelAccumulator {
    pub level: usize,
    pub n_done: u64,
    /// `Σ ‖ΔQ‖²`.
    pub sum_delta_norm_sq: f64,
    /// `Σ ΔQ`.
    pub sum_delta: QoIVector,
    /// `Σ Q_ℓ`.
    pub sum_fine: QoIVector,
    /// `Σ ‖Q_ℓ‖²`.
    pub sum_fine_norm_sq: f64,
    pub counts: MatVecCounts,
    pub wall_seconds: f64,
}

impl LevelAccumulator {
    pub fn new(level: usize, grid: OutputGrid) -> Self {
        Self {
            level,
            n_done: 0,
            sum_delta_norm_sq: 0.0,
            sum_delta: QoIVector::zeros(grid),
            sum_fine: QoIVector::zeros(grid),
            sum_fine_norm_sq: 0.0,
            counts: MatVecCounts::default(),
            wall_seconds: 0.0,
        }
    }

    pub fn push(&mut self, delta: &QoIVector, fine: &QoIVector) {
        self.n_done += 1;
        self.sum_delta_norm_sq += delta.norm_sq();
        self.sum_delta += delta;
        self.sum_fine_norm_sq += fine.norm_sq();
        self.sum_fine += fine;
    }

    pub fn mean_delta(&self) -> QoIVector {
        self.sum_delta.scaled(1.0 / self.n_done.max(1) as f64)
    }
}

fn clamp_variance(v: f64, level: usize) -> f64 {
    if v < 0.0 {
        warn!("level {level}: negative variance estimate {v:e} clamped to 0");
        0.0
    } else {
        v
    }
}

/// Unbiased `V_ℓ = (Σ‖ΔQ‖² - ‖ΣΔQ‖²/N) / (N - 1)`.
pub fn estimate_variance(acc: &LevelAccumulator) -> Result<f64> {
    let n = acc.n_done;
    if n < 2 {
        return Err(Error::InsufficientSamples { n: n as usize });
    }
    let n = n as f64;
    let v = (acc.sum_delta_norm_sq - acc.sum_delta.norm_sq() / n) / (n - 1.0);
    Ok(clamp_variance(v, acc.level))
}

/// Plain Monte Carlo variance of `Q_ℓ` with the `1/N` normalization.
pub fn estimate_mc_variance(acc: &LevelAccumulator) -> Result<f64> {
    let n = acc.n_done;
    if n < 2 {
        return Err(Error::InsufficientSamples { n: n as usize });
    }
    let n = n as f64;
    let v = (acc.sum_fine_norm_sq - acc.sum_fine.norm_sq() / n) / n;
    Ok(clamp_variance(v, acc.level))
}

/// Smallest sample count per level.
pub const MIN_SAMPLES: u64 = 2;

/// `N_ℓ = ⌈(2/ε²) √(V_ℓ/C_ℓ) Σ √(V_k C_k)⌉`, at least [`MIN_SAMPLES`].
pub fn optimal_samples(variances: &[f64], costs: &[f64], eps: f64) -> Result<Vec<u64>> {
    if variances.len() != costs.len() {
        return Err(Error::invalid("variance and cost lists differ in length"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {eps}"
        )));
    }
    if costs.iter().any(|&c| !(c > 0.0)) || variances.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid(
            "costs must be positive and variances nonnegative",
        ));
    }
    let total: f64 = variances
        .iter()
        .zip(costs)
        .map(|(v, c)| (v * c).sqrt())
        .sum();
    Ok(variances
        .iter()
        .zip(costs)
        .map(|(v, c)| {
            let raw = 2.0 / (eps * eps) * (v / c).sqrt() * total;
            (raw.ceil() as u64).max(MIN_SAMPLES)
        })
        .collect())
}

/// Squared bias proxy `‖mean ΔQ_L‖² / (2^α - 1)²`.
pub fn estimate_bias(mean_delta: &QoIVector, alpha: f64) -> f64 {
    let denom = 2f64.powf(alpha) - 1.0;
    mean_delta.norm_sq() / (denom * denom)
}

/// Bias proxy from the last two levels: the level `L-1` mean is scaled down
/// by `2^α` before taking the larger of the two.
pub fn estimate_bias_two(mean_last: &QoIVector, mean_previous: &QoIVector, alpha: f64) -> f64 {
    let scale = 2f64.powf(alpha);
    estimate_bias(mean_last, alpha).max(estimate_bias(mean_previous, alpha) / (scale * scale))
}
