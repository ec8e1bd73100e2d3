//! Multilevel Monte Carlo estimation.

pub mod driver;
pub mod stats;

pub use driver::{
    run_mlmc, sample_delta_q, BiasWindow, DeltaSample, LevelProblem, LevelStats, MlmcConfig,
    MlmcResult, Solve,
};
pub use stats::{
    estimate_bias, estimate_bias_two, estimate_mc_variance, estimate_variance, optimal_samples,
    LevelAccumulator, MIN_SAMPLES,
};
