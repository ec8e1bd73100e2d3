use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use lts_mlmc_cli::{run_experiment, CliError, Experiment, ExperimentConfig, IntegratorChoice};

#[derive(Parser)]
#[command(
    name = "lts-mlmc",
    version,
    about = "MLMC wave experiments with leapfrog local time-stepping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment (MLMC studies or any other kind).
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Speed-up sweeps of the cost model.
    Sweep {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Optimal fine layers and cost exponents on graded meshes.
    Graded {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Standing-wave convergence study.
    Convergence {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print the default configuration of an experiment.
    EmitDefaults {
        #[arg(long)]
        experiment: String,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated tolerances.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: bool,
    /// Also write wall-clock times.
    #[arg(long)]
    timing: bool,
}

fn resolve(experiment: Option<Experiment>, opts: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = match &opts.config {
        Some(path) => ExperimentConfig::load(path, experiment)?,
        None => ExperimentConfig::defaults(
            experiment
                .ok_or_else(|| CliError::Config("--experiment or --config is required".into()))?,
        ),
    };
    if let Some(eps) = &opts.eps {
        config.eps = eps.clone();
    }
    if let Some(i) = opts.integrator {
        config.integrator = i;
    }
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(out) = &opts.out {
        config.out = out.clone();
    }
    config.plot |= opts.plot;
    config.timing |= opts.timing;
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (experiment, opts) = match cli.command {
        Command::EmitDefaults { experiment } => {
            print!(
                "{}",
                ExperimentConfig::defaults(experiment.parse()?).to_toml()
            );
            return Ok(());
        }
        Command::Run { experiment, opts } => (experiment.map(|e| e.parse()).transpose()?, opts),
        Command::Sweep { opts } => (Some(Experiment::CostSweep), opts),
        Command::Graded { opts } => (Some(Experiment::Graded), opts),
        Command::Convergence { opts } => (Some(Experiment::Convergence), opts),
    };
    if opts.workers == Some(0) {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    let config = resolve(experiment, &opts)?;
    let outcome = run_experiment(&config, opts.workers)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for file in &outcome.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
