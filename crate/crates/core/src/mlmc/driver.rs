//! Adaptive MLMC driver.

use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{OutputGrid, QoIVector};
use crate::integrators::MatVecCounts;
use crate::mlmc::stats::{
    estimate_bias, estimate_bias_two, estimate_mc_variance, estimate_variance, optimal_samples,
    LevelAccumulator,
};
use crate::rng::{derive_stream, RngStream};

/// Which level means enter the bias test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BiasWindow {
    #[default]
    Last,
    LastTwo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlmcConfig {
    /// Root mean square error tolerance.
    pub eps: f64,
    /// Assumed weak convergence rate.
    pub alpha: f64,
    pub initial_samples: u64,
    pub initial_level: usize,
    pub max_level: usize,
    pub seed: u64,
    pub bias_window: BiasWindow,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl MlmcConfig {
    pub fn new(eps: f64, max_level: usize, seed: u64) -> Self {
        Self {
            eps,
            alpha: 2.0,
            initial_samples: 16,
            initial_level: 2,
            max_level,
            seed,
            bias_window: BiasWindow::Last,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {}",
                self.eps
            )));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must be at least 1, got {}",
                self.alpha
            )));
        }
        if self.initial_samples < 2 {
            return Err(Error::invalid(
                "at least 2 warm-up samples per level are needed",
            ));
        }
        if self.initial_level > self.max_level {
            return Err(Error::invalid(format!(
                "initial level {} exceeds the maximum level {}",
                self.initial_level, self.max_level
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("worker count must be positive"));
        }
        Ok(())
    }
}

/// One solve at a given level.
#[derive(Clone, Debug)]
pub struct Solve {
    pub qoi: QoIVector,
    pub counts: MatVecCounts,
}

/// A level hierarchy with a random input shared by each fine/coarse pair.
pub trait LevelProblem: Sync {
    type Input: Send;

    fn grid(&self) -> OutputGrid;
    /// Deepest level the hierarchy supports.
    fn max_level(&self) -> usize;
    fn draw(&self, stream: &mut RngStream) -> Self::Input;
    fn solve(&self, level: usize, input: &Self::Input) -> Result<Solve>;
    /// Model cost of one sample of `ΔQ_ℓ` used for allocation.
    fn model_cost(&self, level: usize) -> f64;
}

#[derive(Clone, Debug)]
pub struct DeltaSample {
    pub delta: QoIVector,
    pub fine: QoIVector,
    pub counts: MatVecCounts,
    pub wall_seconds: f64,
}

/// `ΔQ_ℓ = Q_ℓ - Q_{ℓ-1}` (or `Q_0`) for one draw of the random input.
pub fn sample_delta_q<P: LevelProblem>(
    problem: &P,
    level: usize,
    stream: &mut RngStream,
) -> Result<DeltaSample> {
    let started = Instant::now();
    let input = problem.draw(stream);
    let fine = problem.solve(level, &input)?;
    let mut counts = fine.counts;
    let delta = if level == 0 {
        fine.qoi.clone()
    } else {
        let coarse = problem.solve(level - 1, &input)?;
        counts += coarse.counts;
        &fine.qoi - &coarse.qoi
    };
    Ok(DeltaSample {
        delta,
        fine: fine.qoi,
        counts,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub samples: u64,
    pub variance: f64,
    pub mc_variance: f64,
    /// Squared bias proxy computed from this level's mean difference.
    pub bias: f64,
    pub model_cost: f64,
    pub counts: MatVecCounts,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct MlmcResult {
    pub estimate: QoIVector,
    pub levels: Vec<LevelStats>,
    /// `Σ N_ℓ C_ℓ` with model costs.
    pub total_model_cost: f64,
    pub total_counts: MatVecCounts,
    pub converged: bool,
    pub finest_level: usize,
    /// `Σ V_ℓ / N_ℓ`, compared against `ε²/2`.
    pub variance_budget: f64,
    /// Squared bias proxy used in the stopping test, compared against `ε²/2`.
    pub bias_proxy: f64,
    pub eps: f64,
}

/// Samples evaluated per parallel batch before merging.
const CHUNK: u64 = 256;

fn extend_level<P: LevelProblem>(
    problem: &P,
    seed: u64,
    acc: &mut LevelAccumulator,
    target: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<()> {
    let level = acc.level;
    while acc.n_done < target {
        let start = acc.n_done;
        let end = target.min(start + CHUNK);
        let eval = || -> Vec<Result<DeltaSample>> {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let mut stream = derive_stream(seed, level, i);
                    sample_delta_q(problem, level, &mut stream).map_err(|e| Error::Sample {
                        level,
                        sample: i,
                        source: Box::new(e),
                    })
                })
                .collect()
        };
        let batch = match pool {
            Some(p) => p.install(eval),
            None => eval(),
        };
        for s in batch {
            let s = s?;
            acc.push(&s.delta, &s.fine);
            acc.counts += s.counts;
            acc.wall_seconds += s.wall_seconds;
        }
    }
    Ok(())
}

/// Runs the adaptive MLMC loop: warm-up on levels `0..=initial_level`, then
/// alternate between topping up the optimal sample counts and adding a level
/// until the bias proxy drops below `ε²/2` or `max_level` is exhausted.
pub fn run_mlmc<P: LevelProblem>(problem: &P, config: &MlmcConfig) -> Result<MlmcResult> {
    config.validate()?;
    let max_level = config.max_level.min(problem.max_level());
    let pool = match config.workers {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?,
        ),
        None => None,
    };
    let grid = problem.grid();
    let eps2 = config.eps * config.eps;
    let mut last = config.initial_level.min(max_level);
    let mut accs: Vec<LevelAccumulator> =
        (0..=last).map(|l| LevelAccumulator::new(l, grid)).collect();
    let mut targets: Vec<u64> = vec![config.initial_samples; last + 1];
    let costs: Vec<f64> = (0..=max_level).map(|l| problem.model_cost(l)).collect();
    if costs.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::invalid("model costs must be positive"));
    }

    let (converged, bias_proxy) = loop {
        for (acc, &t) in accs.iter_mut().zip(&targets) {
            extend_level(problem, config.seed, acc, t, pool.as_ref())?;
        }
        let variances = accs
            .iter()
            .map(estimate_variance)
            .collect::<Result<Vec<_>>>()?;
        let optimal = optimal_samples(&variances, &costs[..=last], config.eps)?;
        debug!("L = {last}, V = {variances:?}, N = {optimal:?}");
        if optimal.iter().zip(&accs).any(|(&n, a)| n > a.n_done) {
            for (t, (&n, a)) in targets.iter_mut().zip(optimal.iter().zip(&accs)) {
                *t = n.max(a.n_done);
            }
            continue;
        }
        let bias = match config.bias_window {
            BiasWindow::Last => estimate_bias(&accs[last].mean_delta(), config.alpha),
            BiasWindow::LastTwo if last >= 2 => estimate_bias_two(
                &accs[last].mean_delta(),
                &accs[last - 1].mean_delta(),
                config.alpha,
            ),
            BiasWindow::LastTwo => estimate_bias(&accs[last].mean_delta(), config.alpha),
        };
        info!("L = {last}: bias proxy {bias:e} vs {:e}", eps2 / 2.0);
        if bias < eps2 / 2.0 {
            break (true, bias);
        }
        if last >= max_level {
            break (false, bias);
        }
        last += 1;
        accs.push(LevelAccumulator::new(last, grid));
        targets.push(config.initial_samples);
    };

    let mut estimate = QoIVector::zeros(grid);
    let mut levels = Vec::with_capacity(accs.len());
    let mut total_counts = MatVecCounts::default();
    let mut total_model_cost = 0.0;
    let mut variance_budget = 0.0;
    for acc in &accs {
        let mean = acc.mean_delta();
        estimate += &mean;
        let variance = estimate_variance(acc)?;
        variance_budget += variance / acc.n_done as f64;
        total_model_cost += acc.n_done as f64 * costs[acc.level];
        total_counts += acc.counts;
        levels.push(LevelStats {
            level: acc.level,
            samples: acc.n_done,
            variance,
            mc_variance: estimate_mc_variance(acc)?,
            bias: estimate_bias(&mean, config.alpha),
            model_cost: costs[acc.level],
            counts: acc.counts,
            wall_seconds: acc.wall_seconds,
        });
    }
    Ok(MlmcResult {
        estimate,
        levels,
        total_model_cost,
        total_counts,
        converged,
        finest_level: last,
        variance_budget,
        bias_proxy,
        eps: config.eps,
    })
}
