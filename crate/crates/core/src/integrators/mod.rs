//! Explicit time integration: leapfrog and stabilized local time-stepping.

pub mod chebyshev;
pub mod leapfrog;
pub mod lts;

pub use chebyshev::{chebyshev_constants, ChebyshevConstants};
pub use leapfrog::{
    discrete_energy, leapfrog_init, leapfrog_init_signed, leapfrog_step, MatVecCounts, WaveState,
};
pub use lts::{lts_max_eigenvalue, lts_step, LtsOperator, LtsStepper};

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// Default stabilization parameter.
pub const DEFAULT_NU: f64 = 0.01;

/// Growth of `‖z‖∞` over its initial size that counts as a blow-up.
pub const GROWTH_LIMIT: f64 = 1e6;
const CHECK_EVERY: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegratorKind {
    Leapfrog,
    Lts { p: usize, nu: f64 },
}

/// Periodic callback on the running state.
pub struct Snapshot<'a> {
    pub every: usize,
    pub hook: &'a mut dyn FnMut(&WaveState),
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: WaveState,
    pub counts: MatVecCounts,
}

/// `n = ⌈T / dt_max⌉` steps of size `T / n`.
pub fn step_plan(t_final: f64, dt_max: f64) -> Result<(usize, f64)> {
    if !(t_final >= 0.0) || !(dt_max > 0.0) {
        return Err(Error::invalid(format!(
            "need T >= 0 and dt > 0, got T = {t_final}, dt = {dt_max}"
        )));
    }
    if t_final == 0.0 {
        return Ok((0, dt_max));
    }
    let n = ((t_final / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| {
        if x.abs() > m || x.is_nan() {
            x.abs()
        } else {
            m
        }
    })
}

struct Guard {
    limit: f64,
}

impl Guard {
    fn new(state: &WaveState) -> Self {
        let reference = sup_norm(&state.z_prev).max(sup_norm(&state.z_curr));
        Self {
            limit: GROWTH_LIMIT * reference,
        }
    }

    fn check(&self, state: &WaveState) -> Result<()> {
        let norm = sup_norm(&state.z_curr);
        let ok = if self.limit > 0.0 {
            norm <= self.limit
        } else {
            norm.is_finite()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Instability {
                step: state.step,
                time: state.t,
            })
        }
    }
}

/// Integrates `z'' + A z = 0` from `(z0, M^{1/2} v0)` to `t_final` with the
/// largest uniform step not exceeding `dt_max`.
#[allow(clippy::too_many_arguments)]
pub fn run(
    kind: IntegratorKind,
    a: &CsrMatrix,
    selector: &[bool],
    z0: &[f64],
    mhalf_v0: &[f64],
    t_final: f64,
    dt_max: f64,
    mut snapshot: Option<Snapshot<'_>>,
) -> Result<RunOutput> {
    let (n_steps, dt) = step_plan(t_final, dt_max)?;
    if n_steps == 0 {
        return Ok(RunOutput {
            state: WaveState {
                z_prev: z0.to_vec(),
                z_curr: z0.to_vec(),
                t: 0.0,
                dt,
                step: 0,
            },
            counts: MatVecCounts::default(),
        });
    }
    let mut emit = |state: &WaveState| {
        if let Some(s) = snapshot.as_mut() {
            if s.every > 0 && state.step.is_multiple_of(s.every) {
                (s.hook)(state);
            }
        }
    };

    match kind {
        IntegratorKind::Leapfrog => {
            let mut state = leapfrog_init(a, z0, mhalf_v0, None, dt);
            let mut counts = MatVecCounts {
                full: 1,
                ..Default::default()
            };
            let guard = Guard::new(&state);
            emit(&state);
            let mut az = vec![0.0; z0.len()];
            while state.step < n_steps {
                leapfrog::leapfrog_advance(a, &mut state, None, &mut az);
                counts.full += 1;
                if state.step.is_multiple_of(CHECK_EVERY) {
                    guard.check(&state)?;
                }
                emit(&state);
            }
            guard.check(&state)?;
            state.t = t_final;
            Ok(RunOutput { state, counts })
        }
        IntegratorKind::Lts { p, nu } => {
            let op = LtsOperator::new(a, selector)?;
            let mut stepper = LtsStepper::new(&op, chebyshev_constants(p, nu)?);
            let mut state = stepper.start(z0, mhalf_v0, dt);
            let guard = Guard::new(&state);
            emit(&state);
            while state.step < n_steps {
                stepper.advance(&mut state);
                if state.step.is_multiple_of(CHECK_EVERY) {
                    guard.check(&state)?;
                }
                emit(&state);
            }
            guard.check(&state)?;
            state.t = t_final;
            Ok(RunOutput {
                state,
                counts: stepper.counts,
            })
        }
    }
}
