//! Level hierarchies of the three random wave problems, plus a manufactured
//! standing wave for convergence checks.

pub mod channel2d;
pub mod standing_wave;
pub mod wave1d;

pub use channel2d::{ChannelProblem, ChannelSetup};
pub use standing_wave::{observed_order, standing_wave_errors, StandingWaveError};
pub use wave1d::{Wave1dKind, Wave1dProblem, Wave1dSetup};

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fem::{cfl_dt, DiscreteOperator};
use crate::integrators::{
    chebyshev_constants, lts_max_eigenvalue, run, IntegratorKind, LtsOperator, MatVecCounts,
};
use crate::mesh::refinement_ratio;

/// Time integrator family; the LTS step count is set per level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Leapfrog,
    Lts { nu: f64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Leapfrog => "lf",
            Scheme::Lts { .. } => "lts",
        }
    }
}

const PLAN_ITERATIONS: usize = 8;

/// Global step and local step count of one level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelPlan {
    pub dt: f64,
    pub local_steps: usize,
}

/// Chooses the level step from operators that bound every sample's spectrum.
///
/// Leapfrog uses `safety · 2/√λ_max(A)`. LTS starts from the same bound on the
/// coarse block `(I-P)A(I-P)`, takes `p` large enough for both the mesh
/// ratio and the leapfrog limit of the full operator, then reduces the step
/// until the effective operator `A_p` satisfies `dt² λ_max(A_p)` below
/// `max(4 safety², 2(1 + 1/T_p(δ)))`.
pub fn plan_level(
    worst: &[DiscreteOperator],
    scheme: Scheme,
    coarse_size: f64,
    fine_size: f64,
    safety: f64,
) -> Result<LevelPlan> {
    if worst.is_empty() {
        return Err(Error::invalid("no operator to plan the time step from"));
    }
    let mut dt_full = f64::INFINITY;
    for op in worst {
        dt_full = dt_full.min(cfl_dt(&op.normalized, safety)?);
    }
    match scheme {
        Scheme::Leapfrog => Ok(LevelPlan {
            dt: dt_full,
            local_steps: 1,
        }),
        Scheme::Lts { .. } => {
            if worst.iter().all(|op| op.n_fine == 0) {
                return Ok(LevelPlan {
                    dt: dt_full,
                    local_steps: 1,
                });
            }
            let mut dt = f64::INFINITY;
            for op in worst {
                dt = dt.min(cfl_dt(&op.coarse_block(), safety)?);
            }
            let by_ratio = refinement_ratio(coarse_size, fine_size);
            let by_step = ((dt / dt_full) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let local_steps = by_ratio.max(by_step);
            let Scheme::Lts { nu } = scheme else {
                unreachable!()
            };
            let consts = chebyshev_constants(local_steps, nu)?;
            let ops = worst
                .iter()
                .map(LtsOperator::from_operator)
                .collect::<Result<Vec<_>>>()?;
            // coarse nodes next to small elements can push the effective
            // operator past the coarse block; fine modes stay below the
            // stabilized ceiling whatever dt is
            let target = (4.0 * safety * safety).max(consts.effective_ceiling());
            for _ in 0..PLAN_ITERATIONS {
                let mut worst_value = 0.0f64;
                for op in &ops {
                    worst_value = worst_value.max(dt * dt * lts_max_eigenvalue(op, &consts, dt)?);
                }
                if worst_value <= target * (1.0 + 1e-6) {
                    return Ok(LevelPlan { dt, local_steps });
                }
                dt *= (target / worst_value).sqrt() * (1.0 - 1e-3);
            }
            Err(Error::invalid("no stable local time-step found"))
        }
    }
}

/// Integrates from `(z0, M^{1/2} v0)` to `t_final`, returning nodal values.
pub fn integrate(
    op: &DiscreteOperator,
    scheme: Scheme,
    plan: LevelPlan,
    z0: &[f64],
    mhalf_v0: &[f64],
    t_final: f64,
) -> Result<(Vec<f64>, MatVecCounts)> {
    let kind = match scheme {
        Scheme::Leapfrog => IntegratorKind::Leapfrog,
        Scheme::Lts { nu } => IntegratorKind::Lts {
            p: plan.local_steps,
            nu,
        },
    };
    let out = run(
        kind,
        &op.normalized,
        &op.selector,
        z0,
        mhalf_v0,
        t_final,
        plan.dt,
        None,
    )?;
    Ok((op.to_nodal(&out.state.z_curr), out.counts))
}

/// Per-level value computed on first use. Initialization is deterministic,
/// so concurrent first calls agree.
#[derive(Debug)]
pub(crate) struct LazyLevels<T> {
    cells: Vec<OnceLock<T>>,
}

impl<T> LazyLevels<T> {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            cells: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub(crate) fn get_or_try(&self, level: usize, init: impl FnOnce() -> Result<T>) -> Result<&T> {
        let cell = self
            .cells
            .get(level)
            .ok_or_else(|| Error::invalid(format!("level {level} is beyond the hierarchy")))?;
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let v = init()?;
        Ok(cell.get_or_init(|| v))
    }
}
