//! Closed-form work models for MLMC with leapfrog and local time-stepping.
//!
//! Costs count matrix-vector work up to a common constant, so only ratios
//! and exponents carry meaning.

pub mod graded;
pub mod plot;

pub use graded::{
    graded_cost_exponents, graded_cost_lf, graded_cost_lts, graded_gamma_lf, graded_gamma_lts,
    graded_speedup_exponent, optimal_q, total_cost_exponent, AsymptoticRates, CostExponent,
    CostRegime,
};
pub use plot::{svg_line_plot, PlotSeries};

use crate::error::{Error, Result};

/// Locally refined hierarchy: a fraction `r` of the domain is meshed with
/// `h_f = H_0 / p_0`, the rest with `H_ℓ = H_0 / 2^ℓ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementParams {
    pub dim: u32,
    /// Relative volume of the refined region.
    pub r: f64,
    /// Coarse-to-fine ratio on level 0.
    pub p0: f64,
    pub h0: f64,
    /// Polynomial degree.
    pub degree: u32,
    pub t_final: f64,
}

impl RefinementParams {
    /// Unit `H_0`, `k` and `T`.
    pub fn normalized(dim: u32, r: f64, p0: f64) -> Self {
        Self {
            dim,
            r,
            p0,
            h0: 1.0,
            degree: 1,
            t_final: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::invalid(format!(
                "dimension {} not in 1..=3",
                self.dim
            )));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::invalid(format!(
                "relative volume {} outside [0, 1]",
                self.r
            )));
        }
        if !(self.p0 >= 1.0) || !(self.h0 > 0.0) || !(self.t_final > 0.0) || self.degree == 0 {
            return Err(Error::invalid("need p0 >= 1, H0 > 0, T > 0 and k >= 1"));
        }
        Ok(())
    }

    /// `T k^{2(d+1)} / H_0^{d+1}`.
    fn scale(&self) -> f64 {
        let d = self.dim as i32;
        self.t_final * (self.degree as f64).powi(2 * (d + 1)) / self.h0.powi(d + 1)
    }

    /// `⌈log₂ p_0⌉`: levels until the finest mesh is uniform.
    pub fn uniform_finest_level(&self) -> usize {
        self.p0.log2().ceil().max(0.0) as usize
    }
}

/// Model cost of one `ΔQ_ℓ` sample with leapfrog.
pub fn cost_lf_level(params: &RefinementParams, level: usize) -> f64 {
    let d = params.dim as i32;
    let (r, p0) = (params.r, params.p0);
    let bracket = if level == 0 {
        (1.0 - r) * p0 + r * p0.powi(d + 1)
    } else {
        let two_d = 2f64.powi(d);
        (1.0 - r) * (two_d + 1.0) / two_d * two_d.powi(level as i32) * p0 + 2.0 * r * p0.powi(d + 1)
    };
    params.scale() * bracket
}

/// Model cost of one `ΔQ_ℓ` sample with local time-stepping.
pub fn cost_lts_level(params: &RefinementParams, level: usize) -> f64 {
    let d = params.dim as i32;
    let (r, p0) = (params.r, params.p0);
    let bracket = if level == 0 {
        (1.0 - r) + r * p0.powi(d + 1)
    } else {
        let two_d1 = 2f64.powi(d + 1);
        (1.0 - r) * (two_d1 + 1.0) / two_d1 * two_d1.powi(level as i32) + 2.0 * r * p0.powi(d + 1)
    };
    params.scale() * bracket
}

/// `p_ℓ = max(p_0 / 2^ℓ, 1)`.
fn ratio_at(params: &RefinementParams, level: usize) -> f64 {
    (params.p0 / 2f64.powi(level as i32)).max(1.0)
}

/// One leapfrog solve on level `ℓ`, `T k^{2(d+1)} p_ℓ / H_ℓ^{d+1} ((1-r) + r p_ℓ^d)`.
pub fn solve_cost_lf(params: &RefinementParams, level: usize) -> f64 {
    let d = params.dim as i32;
    let p = ratio_at(params, level);
    let h = params.h0 / 2f64.powi(level as i32);
    let k = params.degree as f64;
    params.t_final * k.powi(2 * (d + 1)) * p / h.powi(d + 1)
        * ((1.0 - params.r) + params.r * p.powi(d))
}

/// One LTS solve on level `ℓ`, `T k^{2(d+1)} / H_ℓ^{d+1} ((1-r) + r p_ℓ^{d+1})`.
pub fn solve_cost_lts(params: &RefinementParams, level: usize) -> f64 {
    let d = params.dim as i32;
    let p = ratio_at(params, level);
    let h = params.h0 / 2f64.powi(level as i32);
    let k = params.degree as f64;
    params.t_final * k.powi(2 * (d + 1)) / h.powi(d + 1)
        * ((1.0 - params.r) + params.r * p.powi(d + 1))
}

/// Fine plus coarse solve; coincides with [`cost_lf_level`] while `p_ℓ ≥ 1`
/// and stays finite beyond.
pub fn pair_cost_lf(params: &RefinementParams, level: usize) -> f64 {
    solve_cost_lf(params, level)
        + if level > 0 {
            solve_cost_lf(params, level - 1)
        } else {
            0.0
        }
}

pub fn pair_cost_lts(params: &RefinementParams, level: usize) -> f64 {
    solve_cost_lts(params, level)
        + if level > 0 {
            solve_cost_lts(params, level - 1)
        } else {
            0.0
        }
}

/// `(2/ε²) (Σ √(V_ℓ C_ℓ))²`.
pub fn total_cost(variances: &[f64], costs: &[f64], eps: f64) -> Result<f64> {
    if variances.len() != costs.len() {
        return Err(Error::invalid("variance and cost lists differ in length"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {eps}"
        )));
    }
    let sum: f64 = variances
        .iter()
        .zip(costs)
        .map(|(v, c)| (v * c).sqrt())
        .sum();
    Ok(2.0 / (eps * eps) * sum * sum)
}

/// Level variances, geometric or listed.
#[derive(Clone, Debug, PartialEq)]
pub enum VarianceModel {
    /// `V_ℓ = V_0 / 2^{βℓ}`.
    Geometric {
        v0: f64,
        beta: f64,
    },
    Explicit(Vec<f64>),
}

impl VarianceModel {
    pub fn variances(&self, finest_level: usize) -> Result<Vec<f64>> {
        match self {
            VarianceModel::Geometric { v0, beta } => {
                if !(*v0 > 0.0 && *beta > 0.0) {
                    return Err(Error::invalid(
                        "geometric variance model needs V0 > 0 and beta > 0",
                    ));
                }
                Ok((0..=finest_level)
                    .map(|l| v0 / 2f64.powf(beta * l as f64))
                    .collect())
            }
            VarianceModel::Explicit(v) => {
                if v.len() != finest_level + 1 {
                    return Err(Error::invalid(format!(
                        "{} variances given for {} levels",
                        v.len(),
                        finest_level + 1
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Ratio of total MLMC cost with leapfrog over local time-stepping, with
/// levels `0..=finest_level` and shared variances.
pub fn speedup(
    params: &RefinementParams,
    finest_level: usize,
    variances: &VarianceModel,
) -> Result<f64> {
    params.validate()?;
    let v = variances.variances(finest_level)?;
    let lf: Vec<f64> = (0..=finest_level)
        .map(|l| cost_lf_level(params, l))
        .collect();
    let lts: Vec<f64> = (0..=finest_level)
        .map(|l| cost_lts_level(params, l))
        .collect();
    Ok(total_cost(&v, &lf, 1.0)? / total_cost(&v, &lts, 1.0)?)
}

/// Speed-up with `L = ⌈log₂ p_0⌉` and `V_ℓ = 2^{-βℓ}`.
pub fn speedup_uniform_finest(dim: u32, r: f64, p0: f64, beta: f64) -> Result<f64> {
    let params = RefinementParams::normalized(dim, r, p0);
    speedup(
        &params,
        params.uniform_finest_level(),
        &VarianceModel::Geometric { v0: 1.0, beta },
    )
}

/// Leapfrog over LTS cost for one solve with `p` local steps.
pub fn single_solve_speedup(dim: u32, r: f64, p: f64) -> f64 {
    let d = dim as i32;
    p * ((1.0 - r) + r * p.powi(d)) / ((1.0 - r) + r * p.powi(d + 1))
}

/// Reference parameter sets `(r, p_0, β)` per dimension.
pub fn reference_parameters(dim: u32) -> Option<(f64, f64, f64)> {
    match dim {
        1 => Some((1e-2, 13.0, 4.0)),
        2 => Some((1e-4, 19.0, 6.0)),
        3 => Some((1e-6, 27.0, 8.0)),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    RelativeVolume,
    RefinementRatio,
    VarianceRate,
    /// Single-solve speed-up against the number of local steps.
    LocalSteps,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RelativeVolume => "r",
            SweepAxis::RefinementRatio => "p0",
            SweepAxis::VarianceRate => "beta",
            SweepAxis::LocalSteps => "p",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(SweepAxis::RelativeVolume),
            "p0" => Ok(SweepAxis::RefinementRatio),
            "beta" => Ok(SweepAxis::VarianceRate),
            "p" => Ok(SweepAxis::LocalSteps),
            _ => Err(Error::invalid(format!(
                "unknown sweep axis '{s}' (expected r, p0, beta or p)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub speedup: f64,
}

/// Speed-up along one axis with the others fixed at `(r, p0, beta)`.
/// The `LocalSteps` axis uses `r = 1/100^d` unless `r` is given explicitly.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    dim: u32,
    r: f64,
    p0: f64,
    beta: f64,
) -> Result<Vec<SweepRow>> {
    values
        .iter()
        .map(|&x| {
            let s = match axis {
                SweepAxis::RelativeVolume => speedup_uniform_finest(dim, x, p0, beta)?,
                SweepAxis::RefinementRatio => speedup_uniform_finest(dim, r, x, beta)?,
                SweepAxis::VarianceRate => speedup_uniform_finest(dim, r, p0, x)?,
                SweepAxis::LocalSteps => single_solve_speedup(dim, r, x),
            };
            Ok(SweepRow { x, speedup: s })
        })
        .collect()
}

/// `n` points from `lo` to `hi`, logarithmically or linearly spaced.
pub fn spaced(lo: f64, hi: f64, n: usize, log: bool) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if log {
                (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn level_cost_examples() {
        assert_eq!(
            cost_lf_level(&RefinementParams::normalized(1, 0.0, 1.0), 0),
            1.0
        );
        let p = RefinementParams::normalized(1, 0.01, 16.0);
        assert!((cost_lf_level(&p, 0) - 18.4).abs() < 1e-12);
        assert_eq!(
            cost_lts_level(&RefinementParams::normalized(2, 0.0, 7.0), 0),
            1.0
        );
    }

    #[test]
    fn pair_costs_match_closed_forms_while_refined() {
        for dim in 1..=3 {
            let mut p = RefinementParams::normalized(dim, 0.03, 32.0);
            p.h0 = 0.2;
            p.t_final = 3.0;
            p.degree = 2;
            for l in 0..=5 {
                let rel = |a: f64, b: f64| ((a - b) / b).abs();
                assert!(rel(pair_cost_lf(&p, l), cost_lf_level(&p, l)) < 1e-12);
                assert!(rel(pair_cost_lts(&p, l), cost_lts_level(&p, l)) < 1e-12);
            }
        }
    }

    #[test]
    fn level_zero_ratio_in_the_channel_regime() {
        let p = RefinementParams::normalized(2, 2.1e-4, 22.0);
        let ratio = cost_lf_level(&p, 0) / cost_lts_level(&p, 0);
        assert!((ratio - 7.488).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn unrefined_costs_differ_by_the_pair_factors() {
        for dim in 1..=3u32 {
            let p = RefinementParams::normalized(dim, 0.2, 1.0);
            for l in 1..5 {
                let two_d = 2f64.powi(dim as i32);
                let lf_factor = (two_d + 1.0) / two_d;
                let lts_factor = (2.0 * two_d + 1.0) / (2.0 * two_d);
                let lf = cost_lf_level(&p, l);
                let lts = cost_lts_level(&p, l);
                // pure coarse parts
                let coarse_lf = 0.8 * lf_factor * two_d.powi(l as i32);
                let coarse_lts = 0.8 * lts_factor * (2.0 * two_d).powi(l as i32);
                assert!(
                    (lf - coarse_lf - 0.4).abs() < 1e-9 && (lts - coarse_lts - 0.4).abs() < 1e-9
                );
            }
        }
    }

    #[test]
    fn total_cost_examples() {
        assert!((total_cost(&[1.0, 0.25], &[1.0, 4.0], 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((total_cost(&[3.0], &[2.0], 0.1).unwrap() - 1200.0).abs() < 1e-9);
        let a = total_cost(&[1.0, 0.1], &[1.0, 7.0], 0.2).unwrap();
        let b = total_cost(&[1.0, 0.1], &[1.0, 7.0], 0.1).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
        assert!(total_cost(&[1.0], &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn speedup_is_one_without_benefit() {
        for dim in 1..=3 {
            let full = RefinementParams::normalized(dim, 1.0, 17.0);
            let s = speedup(&full, 5, &VarianceModel::Geometric { v0: 1.0, beta: 3.0 }).unwrap();
            assert_eq!(s, 1.0);
            let none = RefinementParams::normalized(dim, 0.3, 1.0);
            assert_eq!(
                speedup(&none, 0, &VarianceModel::Explicit(vec![2.0])).unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn reference_speedups() {
        // regression values of the closed forms
        let expected = [4.756, 10.158, 16.391];
        for dim in 1..=3 {
            let (r, p0, beta) = reference_parameters(dim).unwrap();
            let s = speedup_uniform_finest(dim, r, p0, beta).unwrap();
            assert!(
                (s - expected[dim as usize - 1]).abs() < 1e-3,
                "d = {dim}: {s}"
            );
        }
    }

    #[test]
    fn refinement_ratio_has_interior_optimum() {
        let p0s: Vec<f64> = (2..=100).map(|p| p as f64).collect();
        for dim in 1..=3 {
            let (r, _, beta) = reference_parameters(dim).unwrap();
            let rows = sweep(SweepAxis::RefinementRatio, &p0s, dim, r, 0.0, beta).unwrap();
            let best = rows
                .iter()
                .max_by(|a, b| a.speedup.total_cmp(&b.speedup))
                .unwrap();
            assert!((10.0..=30.0).contains(&best.x), "d = {dim}: {}", best.x);
        }
    }

    #[test]
    fn speedup_grows_with_beta_and_shrinking_volume() {
        for dim in 1..=3 {
            let (r, p0, _) = reference_parameters(dim).unwrap();
            let rows = sweep(
                SweepAxis::VarianceRate,
                &spaced(0.5, 12.0, 48, false),
                dim,
                r,
                p0,
                0.0,
            )
            .unwrap();
            assert!(rows
                .windows(2)
                .all(|w| w[1].speedup >= w[0].speedup - 1e-12));
            let (_, p0, beta) = reference_parameters(dim).unwrap();
            let rows = sweep(
                SweepAxis::RelativeVolume,
                &spaced(1e-6, 1.0, 60, true),
                dim,
                0.0,
                p0,
                beta,
            )
            .unwrap();
            assert!(rows
                .windows(2)
                .all(|w| w[1].speedup <= w[0].speedup + 1e-12));
        }
    }

    #[test]
    fn single_solve_speedup_limits() {
        assert_eq!(single_solve_speedup(2, 0.3, 1.0), 1.0);
        assert!((single_solve_speedup(2, 1e-14, 17.0) - 17.0).abs() < 1e-6);
        let ps: Vec<f64> = (1..=200).map(|p| p as f64).collect();
        let rows = sweep(SweepAxis::LocalSteps, &ps, 2, 1e-4, 0.0, 0.0).unwrap();
        let best = rows
            .iter()
            .max_by(|a, b| a.speedup.total_cmp(&b.speedup))
            .unwrap();
        assert_eq!(best.x, 18.0);
        assert!(best.x > 1.0 && best.x < 200.0);
    }

    #[test]
    fn leapfrog_never_cheaper_on_random_parameters() {
        let mut s = derive_stream(77, 0, 0);
        for _ in 0..1000 {
            let dim = 1 + (s.next_u64() % 3) as u32;
            let r = 10f64.powf(s.uniform(-6.0, -0.01));
            let p0 = (2 + s.next_u64() % 63) as f64;
            let beta = s.uniform(0.5, 8.0);
            let p = RefinementParams::normalized(dim, r, p0);
            // closed forms while every p_ℓ >= 1
            let l = p0.log2().floor() as usize;
            let v = VarianceModel::Geometric { v0: 1.0, beta }
                .variances(l)
                .unwrap();
            let lf: Vec<f64> = (0..=l).map(|k| cost_lf_level(&p, k)).collect();
            let lts: Vec<f64> = (0..=l).map(|k| cost_lts_level(&p, k)).collect();
            assert!(total_cost(&v, &lf, 0.1).unwrap() >= total_cost(&v, &lts, 0.1).unwrap());
            // clamped pair costs down to the uniform finest level
            let l = p.uniform_finest_level();
            let v = VarianceModel::Geometric { v0: 1.0, beta }
                .variances(l)
                .unwrap();
            let lf: Vec<f64> = (0..=l).map(|k| pair_cost_lf(&p, k)).collect();
            let lts: Vec<f64> = (0..=l).map(|k| pair_cost_lts(&p, k)).collect();
            assert!(total_cost(&v, &lf, 0.1).unwrap() >= total_cost(&v, &lts, 0.1).unwrap());
        }
    }

    #[test]
    fn closed_forms_overcharge_lts_below_unit_ratio() {
        // p_L = 3/4 on the last level: the closed form charges LTS more than leapfrog
        let p = RefinementParams::normalized(1, 0.5, 3.0);
        assert!(cost_lts_level(&p, 2) > cost_lf_level(&p, 2));
        assert!(pair_cost_lts(&p, 2) <= pair_cost_lf(&p, 2));
    }

    #[test]
    fn axis_names_round_trip() {
        for axis in [
            SweepAxis::RelativeVolume,
            SweepAxis::RefinementRatio,
            SweepAxis::VarianceRate,
            SweepAxis::LocalSteps,
        ] {
            assert_eq!(axis.name().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("q".parse::<SweepAxis>().is_err());
    }
}
