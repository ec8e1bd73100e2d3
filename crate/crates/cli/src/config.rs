//! Flat TOML experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use lts_mlmc::integrators::DEFAULT_NU;
use lts_mlmc::mlmc::BiasWindow;
use lts_mlmc::problems::{ChannelSetup, Scheme, Wave1dSetup};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Smooth1d,
    Jump1d,
    Channel2d,
    CostSweep,
    Graded,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Smooth1d,
        Experiment::Jump1d,
        Experiment::Channel2d,
        Experiment::CostSweep,
        Experiment::Graded,
        Experiment::Convergence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Smooth1d => "smooth1d",
            Experiment::Jump1d => "jump1d",
            Experiment::Channel2d => "channel2d",
            Experiment::CostSweep => "cost-sweep",
            Experiment::Graded => "graded",
            Experiment::Convergence => "convergence",
        }
    }

    pub fn is_mlmc(&self) -> bool {
        matches!(
            self,
            Experiment::Smooth1d | Experiment::Jump1d | Experiment::Channel2d
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                CliError::Config(format!(
                    "unknown experiment '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorChoice {
    Lf,
    Lts,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasChoice {
    Last,
    LastTwo,
}

impl From<BiasChoice> for BiasWindow {
    fn from(b: BiasChoice) -> Self {
        match b {
            BiasChoice::Last => BiasWindow::Last,
            BiasChoice::LastTwo => BiasWindow::LastTwo,
        }
    }
}

/// Fully resolved configuration. Keys absent from a file take the
/// experiment's defaults.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub eps: Vec<f64>,
    pub integrator: IntegratorChoice,
    pub seed: u64,
    /// Coarse mesh size on level 0.
    pub h0: f64,
    pub h_f: f64,
    pub t_final: f64,
    pub nu: f64,
    pub safety: f64,
    pub grid_points: usize,
    pub max_level: usize,
    pub alpha: f64,
    pub initial_samples: u64,
    pub bias_window: BiasChoice,
    /// Points per sweep axis.
    pub sweep_points: usize,
    /// Largest layer count in the graded analysis.
    pub graded_layers: u64,
    /// Mesh refinements in the convergence study.
    pub refinements: usize,
    /// Also write wall-clock times to `timing.csv`.
    pub timing: bool,
    pub plot: bool,
    pub out: PathBuf,
}

/// On-disk form: every key optional, unknown keys collected.
#[derive(Debug, Default, Deserialize)]
struct RawConfig {
    experiment: Option<Experiment>,
    eps: Option<Vec<f64>>,
    integrator: Option<IntegratorChoice>,
    seed: Option<u64>,
    h0: Option<f64>,
    h_f: Option<f64>,
    t_final: Option<f64>,
    nu: Option<f64>,
    safety: Option<f64>,
    grid_points: Option<usize>,
    max_level: Option<usize>,
    alpha: Option<f64>,
    initial_samples: Option<u64>,
    bias_window: Option<BiasChoice>,
    sweep_points: Option<usize>,
    graded_layers: Option<u64>,
    refinements: Option<usize>,
    timing: Option<bool>,
    plot: Option<bool>,
    out: Option<PathBuf>,
    #[serde(flatten)]
    unknown: BTreeMap<String, toml::Value>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let smooth = Wave1dSetup::smooth();
        let (eps, h0, h_f, t_final, grid_points, max_level) = match experiment {
            Experiment::Smooth1d => (
                vec![4e-3, 2e-3, 1e-3],
                smooth.h0,
                smooth.h_f,
                smooth.t_final,
                smooth.grid_points,
                smooth.max_level,
            ),
            Experiment::Jump1d => {
                let s = Wave1dSetup::jump();
                (
                    vec![4e-3, 2e-3, 1e-3],
                    s.h0,
                    s.h_f,
                    s.t_final,
                    s.grid_points,
                    s.max_level,
                )
            }
            Experiment::Channel2d => {
                let s = ChannelSetup::default();
                (
                    vec![5e-5],
                    s.h0,
                    s.h_f,
                    s.t_final,
                    s.grid_points,
                    s.max_level,
                )
            }
            Experiment::CostSweep | Experiment::Graded | Experiment::Convergence => (
                vec![1e-3],
                smooth.h0,
                smooth.h_f,
                smooth.t_final,
                smooth.grid_points,
                smooth.max_level,
            ),
        };
        Self {
            experiment,
            eps,
            integrator: IntegratorChoice::Both,
            seed: DEFAULT_SEED,
            h0,
            h_f,
            t_final,
            nu: DEFAULT_NU,
            safety: 0.9,
            grid_points,
            max_level,
            alpha: 2.0,
            initial_samples: 16,
            bias_window: BiasChoice::Last,
            sweep_points: 60,
            graded_layers: 4096,
            refinements: 4,
            timing: false,
            plot: false,
            out: PathBuf::from("results").join(experiment.name()),
        }
    }

    /// Parses TOML text; `experiment` overrides the file's experiment key.
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if !raw.unknown.is_empty() {
            let keys: Vec<_> = raw.unknown.keys().map(String::as_str).collect();
            return Err(CliError::Config(format!(
                "unknown config keys: {}",
                keys.join(", ")
            )));
        }
        let experiment = experiment.or(raw.experiment).ok_or_else(|| {
            CliError::Config("no experiment given (config key or --experiment)".into())
        })?;
        let d = Self::defaults(experiment);
        let config = Self {
            experiment,
            eps: raw.eps.unwrap_or(d.eps),
            integrator: raw.integrator.unwrap_or(d.integrator),
            seed: raw.seed.unwrap_or(d.seed),
            h0: raw.h0.unwrap_or(d.h0),
            h_f: raw.h_f.unwrap_or(d.h_f),
            t_final: raw.t_final.unwrap_or(d.t_final),
            nu: raw.nu.unwrap_or(d.nu),
            safety: raw.safety.unwrap_or(d.safety),
            grid_points: raw.grid_points.unwrap_or(d.grid_points),
            max_level: raw.max_level.unwrap_or(d.max_level),
            alpha: raw.alpha.unwrap_or(d.alpha),
            initial_samples: raw.initial_samples.unwrap_or(d.initial_samples),
            bias_window: raw.bias_window.unwrap_or(d.bias_window),
            sweep_points: raw.sweep_points.unwrap_or(d.sweep_points),
            graded_layers: raw.graded_layers.unwrap_or(d.graded_layers),
            refinements: raw.refinements.unwrap_or(d.refinements),
            timing: raw.timing.unwrap_or(d.timing),
            plot: raw.plot.unwrap_or(d.plot),
            out: raw.out.unwrap_or(d.out),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, experiment)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return fail(format!(
                "eps must be a nonempty list of positive tolerances, got {:?}",
                self.eps
            ));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return fail(format!("nu = {} outside [0, 1]", self.nu));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return fail(format!("safety = {} outside (0, 1]", self.safety));
        }
        if !(self.h_f > 0.0 && self.h_f <= self.h0) {
            return fail(format!(
                "need 0 < h_f <= h0, got h_f = {}, h0 = {}",
                self.h_f, self.h0
            ));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return fail(format!("t_final = {} must be positive", self.t_final));
        }
        if self.grid_points < 2 {
            return fail(format!(
                "grid_points = {} must be at least 2",
                self.grid_points
            ));
        }
        if self.max_level < 2 {
            return fail(format!("max_level = {} must be at least 2", self.max_level));
        }
        if !(self.alpha >= 1.0) {
            return fail(format!("alpha = {} must be at least 1", self.alpha));
        }
        if self.initial_samples < 2 {
            return fail(format!(
                "initial_samples = {} must be at least 2",
                self.initial_samples
            ));
        }
        if self.sweep_points < 2 || self.graded_layers < 16 || self.refinements < 1 {
            return fail("need sweep_points >= 2, graded_layers >= 16 and refinements >= 1".into());
        }
        Ok(())
    }

    /// Schemes to run, in output order.
    pub fn schemes(&self) -> Vec<Scheme> {
        let lts = Scheme::Lts { nu: self.nu };
        match self.integrator {
            IntegratorChoice::Lf => vec![Scheme::Leapfrog],
            IntegratorChoice::Lts => vec![lts],
            IntegratorChoice::Both => vec![Scheme::Leapfrog, lts],
        }
    }

    pub fn wave1d_setup(&self, scheme: Scheme) -> Wave1dSetup {
        let base = match self.experiment {
            Experiment::Jump1d => Wave1dSetup::jump(),
            _ => Wave1dSetup::smooth(),
        };
        let centre = base.fine_region.1;
        Wave1dSetup {
            h0: self.h0,
            h_f: self.h_f,
            fine_region: (centre - self.h0, centre),
            t_final: self.t_final,
            max_level: self.max_level,
            scheme,
            safety: self.safety,
            grid_points: self.grid_points,
            ..base
        }
    }

    pub fn channel_setup(&self, scheme: Scheme) -> ChannelSetup {
        ChannelSetup {
            h0: self.h0,
            h_f: self.h_f,
            t_final: self.t_final,
            max_level: self.max_level,
            scheme,
            safety: self.safety,
            grid_points: self.grid_points,
            ..ChannelSetup::default()
        }
    }
}
