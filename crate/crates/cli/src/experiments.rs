//! One runner per experiment; each writes its CSVs into the output directory.

use std::path::PathBuf;

use log::{info, warn};

use lts_mlmc::cost::{
    fitted_slope, graded_cost_exponents, graded_cost_lf, graded_cost_lts, graded_gamma_lf,
    graded_gamma_lts, optimal_q, reference_parameters, spaced, speedup_uniform_finest,
    svg_line_plot, sweep, PlotSeries, RefinementParams, SweepAxis,
};
use lts_mlmc::mlmc::{run_mlmc, LevelProblem, MlmcConfig, MlmcResult};
use lts_mlmc::problems::{
    observed_order, standing_wave_errors, ChannelProblem, Scheme, Wave1dProblem,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{create_dir, header, num, write_csv, write_text};
use crate::CliError;

/// Files written and a short human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// One MLMC estimate for one integrator and tolerance.
#[derive(Debug)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub eps: f64,
    /// Model cost parameters of the hierarchy.
    pub cost_params: RefinementParams,
    pub result: MlmcResult,
}

pub fn run_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Outcome, CliError> {
    config.validate()?;
    create_dir(&config.out)?;
    match config.experiment {
        Experiment::Smooth1d | Experiment::Jump1d | Experiment::Channel2d => {
            let runs = run_mlmc_experiment(config, workers)?;
            write_mlmc_outputs(config, &runs)
        }
        Experiment::CostSweep => run_cost_sweep(config),
        Experiment::Graded => run_graded(config),
        Experiment::Convergence => run_convergence(config),
    }
}

fn mlmc_config(config: &ExperimentConfig, eps: f64, workers: Option<usize>) -> MlmcConfig {
    MlmcConfig {
        alpha: config.alpha,
        initial_samples: config.initial_samples,
        bias_window: config.bias_window.into(),
        workers,
        ..MlmcConfig::new(eps, config.max_level, config.seed)
    }
}

fn run_tolerances<P: LevelProblem>(
    problem: &P,
    scheme: Scheme,
    cost_params: RefinementParams,
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<RunSummary>, CliError> {
    config
        .eps
        .iter()
        .map(|&eps| {
            info!("{} with {} at eps = {eps:e}", config.experiment, scheme.name());
            let result = run_mlmc(problem, &mlmc_config(config, eps, workers))?;
            if !result.converged {
                warn!(
                    "{} at eps = {eps:e} stopped at the maximum level {} before the bias test passed",
                    scheme.name(),
                    result.finest_level
                );
            }
            Ok(RunSummary {
                scheme,
                eps,
                cost_params,
                result,
            })
        })
        .collect()
}

/// Runs every integrator at every tolerance. All integrators draw the same
/// sample sequence, since streams depend only on seed, level and index.
pub fn run_mlmc_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<RunSummary>, CliError> {
    let mut runs = Vec::new();
    for scheme in config.schemes() {
        match config.experiment {
            Experiment::Smooth1d | Experiment::Jump1d => {
                let setup = config.wave1d_setup(scheme);
                let params = setup.cost_params();
                let problem = Wave1dProblem::new(setup)?;
                runs.extend(run_tolerances(&problem, scheme, params, config, workers)?);
            }
            Experiment::Channel2d => {
                let setup = config.channel_setup(scheme);
                let params = setup.cost_params();
                let problem = ChannelProblem::new(setup)?;
                runs.extend(run_tolerances(&problem, scheme, params, config, workers)?);
            }
            other => {
                return Err(CliError::Config(format!(
                    "{other} is not an MLMC experiment"
                )))
            }
        }
    }
    Ok(runs)
}

pub fn write_mlmc_outputs(
    config: &ExperimentConfig,
    runs: &[RunSummary],
) -> Result<Outcome, CliError> {
    let head = header(config);
    let dir = &config.out;
    let mut out = Outcome::default();

    let level_rows = runs.iter().flat_map(|run| {
        run.result.levels.iter().map(move |l| {
            vec![
                run.scheme.name().to_string(),
                num(run.eps),
                l.level.to_string(),
                l.samples.to_string(),
                num(l.variance),
                num(l.mc_variance),
                num(l.bias),
                num(l.model_cost),
                l.counts.full.to_string(),
                l.counts.coarse.to_string(),
                l.counts.fine.to_string(),
            ]
        })
    });
    out.files.push(write_csv(
        dir,
        "levels.csv",
        &head,
        &[
            "integrator",
            "eps",
            "level",
            "samples",
            "variance",
            "mc_variance",
            "bias",
            "model_cost",
            "matvec_full",
            "matvec_coarse",
            "matvec_fine",
        ],
        level_rows,
    )?);

    let estimate_rows = runs.iter().flat_map(|run| {
        let e = &run.result.estimate;
        e.grid
            .points()
            .zip(&e.values)
            .map(move |(x, v)| vec![run.scheme.name().to_string(), num(run.eps), num(x), num(*v)])
    });
    out.files.push(write_csv(
        dir,
        "estimate.csv",
        &head,
        &["integrator", "eps", "point", "value"],
        estimate_rows,
    )?);

    let work_rows = runs.iter().map(|run| {
        let r = &run.result;
        vec![
            run.scheme.name().to_string(),
            num(run.eps),
            r.finest_level.to_string(),
            r.converged.to_string(),
            num(r.total_model_cost),
            num(r.variance_budget),
            num(r.bias_proxy),
            r.total_counts.full.to_string(),
            r.total_counts.coarse.to_string(),
            r.total_counts.fine.to_string(),
        ]
    });
    out.files.push(write_csv(
        dir,
        "work.csv",
        &head,
        &[
            "integrator",
            "eps",
            "finest_level",
            "converged",
            "total_model_cost",
            "variance_budget",
            "bias_proxy",
            "matvec_full",
            "matvec_coarse",
            "matvec_fine",
        ],
        work_rows,
    )?);

    if config.timing {
        let timing_rows = runs.iter().flat_map(|run| {
            run.result.levels.iter().map(move |l| {
                vec![
                    run.scheme.name().to_string(),
                    num(run.eps),
                    l.level.to_string(),
                    format!("{:.3}", l.wall_seconds),
                ]
            })
        });
        out.files.push(write_csv(
            dir,
            "timing.csv",
            &head,
            &["integrator", "eps", "level", "wall_seconds"],
            timing_rows,
        )?);
    }

    if config.plot {
        let schemes = config.schemes();
        let work: Vec<PlotSeries> = schemes
            .iter()
            .map(|s| PlotSeries {
                label: s.name().into(),
                points: runs
                    .iter()
                    .filter(|r| r.scheme == *s)
                    .map(|r| (r.eps, r.result.total_model_cost))
                    .collect(),
            })
            .collect();
        out.files.push(write_text(
            dir,
            "work.svg",
            &svg_line_plot("MLMC model cost", "eps", "model cost", &work, true, true),
        )?);
        let variances: Vec<PlotSeries> = schemes
            .iter()
            .filter_map(|s| {
                let finest = runs.iter().rfind(|r| r.scheme == *s)?;
                Some(PlotSeries {
                    label: format!("{} eps={:e}", s.name(), finest.eps),
                    points: finest
                        .result
                        .levels
                        .iter()
                        .map(|l| (l.level as f64, l.variance))
                        .collect(),
                })
            })
            .collect();
        out.files.push(write_text(
            dir,
            "variance.svg",
            &svg_line_plot("Level variances", "level", "V", &variances, false, true),
        )?);
    }

    for run in runs {
        let r = &run.result;
        let n: Vec<String> = r.levels.iter().map(|l| l.samples.to_string()).collect();
        out.summary.push(format!(
            "{:<4} eps={:e} L={} N=[{}] model_cost={:e}{}",
            run.scheme.name(),
            run.eps,
            r.finest_level,
            n.join(", "),
            r.total_model_cost,
            if r.converged { "" } else { " (not converged)" }
        ));
    }
    let schemes = config.schemes();
    if schemes.len() == 2 {
        for eps in &config.eps {
            let cost = |s: &Scheme| {
                runs.iter()
                    .find(|r| r.scheme == *s && r.eps == *eps)
                    .map(|r| r.result.total_model_cost)
            };
            if let (Some(lf), Some(lts)) = (cost(&schemes[0]), cost(&schemes[1])) {
                out.summary
                    .push(format!("speed-up at eps={eps:e}: {:.3}", lf / lts));
            }
        }
    }
    Ok(out)
}

fn sweep_values(axis: SweepAxis, n: usize) -> Vec<f64> {
    match axis {
        SweepAxis::RelativeVolume => spaced(1e-7, 1.0, n, true),
        SweepAxis::RefinementRatio => spaced(1.0, 1000.0, n, true),
        SweepAxis::VarianceRate => spaced(0.5, 10.0, n, false),
        SweepAxis::LocalSteps => spaced(1.0, 100.0, n, true),
    }
}

const AXES: [SweepAxis; 4] = [
    SweepAxis::RelativeVolume,
    SweepAxis::RefinementRatio,
    SweepAxis::VarianceRate,
    SweepAxis::LocalSteps,
];

fn run_cost_sweep(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let head = header(config);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let mut curves: Vec<(SweepAxis, PlotSeries)> = Vec::new();
    for dim in 1..=3u32 {
        let (r, p0, beta) =
            reference_parameters(dim).expect("dimensions 1 to 3 have reference parameters");
        let s = speedup_uniform_finest(dim, r, p0, beta)?;
        let finest = (p0.log2().ceil()) as usize;
        table.push(vec![
            dim.to_string(),
            num(r),
            num(p0),
            num(beta),
            finest.to_string(),
            num(s),
        ]);
        out.summary.push(format!(
            "d={dim} r={r:e} p0={p0} beta={beta}: speed-up {s:.3}"
        ));
        for axis in AXES {
            let points = sweep(
                axis,
                &sweep_values(axis, config.sweep_points),
                dim,
                r,
                p0,
                beta,
            )?;
            rows.extend(points.iter().map(|p| {
                vec![
                    dim.to_string(),
                    axis.name().to_string(),
                    num(p.x),
                    num(p.speedup),
                ]
            }));
            curves.push((
                axis,
                PlotSeries {
                    label: format!("d={dim}"),
                    points: points.iter().map(|p| (p.x, p.speedup)).collect(),
                },
            ));
        }
    }
    out.files.push(write_csv(
        &config.out,
        "sweep.csv",
        &head,
        &["dim", "axis", "x", "speedup"],
        rows,
    )?);
    out.files.push(write_csv(
        &config.out,
        "table.csv",
        &head,
        &["dim", "r", "p0", "beta", "finest_level", "speedup"],
        table,
    )?);
    if config.plot {
        for axis in AXES {
            let series: Vec<PlotSeries> = curves
                .iter()
                .filter(|(a, _)| *a == axis)
                .map(|(_, s)| s.clone())
                .collect();
            let log_x = axis != SweepAxis::VarianceRate;
            let svg = svg_line_plot(
                &format!("speed-up against {}", axis.name()),
                axis.name(),
                "speed-up",
                &series,
                log_x,
                true,
            );
            out.files.push(write_text(
                &config.out,
                &format!("sweep_{}.svg", axis.name()),
                &svg,
            )?);
        }
    }
    Ok(out)
}

const GRADED_CASES: [(u32, f64); 5] = [(1, 2.0), (2, 2.0), (1, 3.0), (2, 3.0), (3, 2.0)];

fn run_graded(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let head = header(config);
    let mut out = Outcome::default();
    let layer_counts: Vec<u64> = (2..=63)
        .map(|e| 1u64 << e)
        .take_while(|&m| m <= config.graded_layers)
        .collect();
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut series = Vec::new();
    for (d, s) in GRADED_CASES {
        let mut qs = Vec::new();
        for &m in &layer_counts {
            let q = optimal_q(m, s, d)?;
            let (lf, lts) = (graded_cost_lf(m, s, d), graded_cost_lts(m, s, d, q)?);
            rows.push(vec![
                d.to_string(),
                num(s),
                m.to_string(),
                q.to_string(),
                num(lf),
                num(lts),
                num(lf / lts),
            ]);
            qs.push(q);
        }
        // the asymptotic law is fitted from m >= 16
        let fit: Vec<(f64, f64)> = layer_counts
            .iter()
            .zip(&qs)
            .filter(|(&m, _)| m >= 16)
            .map(|(&m, &q)| ((m as f64).ln(), (q as f64).ln()))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        let slope = fitted_slope(&x, &y);
        let law = d as f64 / (d as f64 + s - 1.0);
        slopes.push(vec![
            d.to_string(),
            num(s),
            num(slope),
            num(law),
            num(graded_gamma_lf(s, d)),
            num(graded_gamma_lts(s, d)),
        ]);
        out.summary.push(format!(
            "d={d} s={s}: q_opt slope {slope:.3} (law {law:.3})"
        ));
        series.push(PlotSeries {
            label: format!("d={d} s={s}"),
            points: layer_counts
                .iter()
                .zip(&qs)
                .map(|(&m, &q)| (m as f64, q as f64))
                .collect(),
        });
    }
    out.files.push(write_csv(
        &config.out,
        "graded.csv",
        &head,
        &["dim", "s", "layers", "q_opt", "cost_lf", "cost_lts", "gain"],
        rows,
    )?);
    out.files.push(write_csv(
        &config.out,
        "graded_slopes.csv",
        &head,
        &[
            "dim",
            "s",
            "fitted_slope",
            "asymptotic_slope",
            "gamma_lf",
            "gamma_lts",
        ],
        slopes,
    )?);

    let mut exponents = Vec::new();
    for k in [1u32, 2] {
        for beta in spaced(0.25, 6.0, 24, false) {
            // combinations outside the theorem's hypothesis are skipped
            let Ok((lf, lts)) = graded_cost_exponents(beta, 2.0, 3, k) else {
                continue;
            };
            exponents.push(vec![
                "3".into(),
                num(2.0),
                k.to_string(),
                num(beta),
                lf.regime.label().into(),
                lts.regime.label().into(),
                num(lf.eps_exponent),
                num(lts.eps_exponent),
                num((lts.eps_exponent - lf.eps_exponent).max(0.0)),
            ]);
        }
    }
    out.files.push(write_csv(
        &config.out,
        "exponents.csv",
        &head,
        &[
            "dim",
            "s",
            "k",
            "beta",
            "regime_lf",
            "regime_lts",
            "eps_exponent_lf",
            "eps_exponent_lts",
            "speedup_exponent",
        ],
        exponents,
    )?);
    if config.plot {
        let svg = svg_line_plot(
            "optimal fine layers",
            "layers m",
            "q_opt",
            &series,
            true,
            true,
        );
        out.files.push(write_text(&config.out, "graded.svg", &svg)?);
    }
    Ok(out)
}

fn run_convergence(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let head = header(config);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    let mut series = Vec::new();
    for scheme in config.schemes() {
        let errors = standing_wave_errors(scheme, config.refinements)?;
        let order = observed_order(&errors);
        rows.extend(
            errors
                .iter()
                .map(|e| vec![scheme.name().to_string(), num(e.h), num(e.error)]),
        );
        orders.push(vec![scheme.name().to_string(), num(order)]);
        out.summary
            .push(format!("{}: observed order {order:.3}", scheme.name()));
        series.push(PlotSeries {
            label: scheme.name().into(),
            points: errors.iter().map(|e| (e.h, e.error)).collect(),
        });
    }
    out.files.push(write_csv(
        &config.out,
        "convergence.csv",
        &head,
        &["integrator", "h", "error"],
        rows,
    )?);
    out.files.push(write_csv(
        &config.out,
        "orders.csv",
        &head,
        &["integrator", "order"],
        orders,
    )?);
    if config.plot {
        let svg = svg_line_plot("standing wave error", "H", "L2 error", &series, true, true);
        out.files
            .push(write_text(&config.out, "convergence.svg", &svg)?);
    }
    Ok(out)
}
