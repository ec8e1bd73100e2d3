//! Second-order leapfrog in normalized variables.

use crate::error::{Error, Result};
use crate::fem::CsrMatrix;

/// Two consecutive time levels of the normalized solution.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub z_prev: Vec<f64>,
    pub z_curr: Vec<f64>,
    /// Time of `z_curr`.
    pub t: f64,
    pub dt: f64,
    /// Index of `z_curr` (0 at the initial time).
    pub step: usize,
}

impl WaveState {
    pub fn dim(&self) -> usize {
        self.z_curr.len()
    }
}

/// Matrix-vector products performed, by operator part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatVecCounts {
    /// Products with the full `A`.
    pub full: u64,
    /// Products with `A (I - P)`.
    pub coarse: u64,
    /// Products with `A P`.
    pub fine: u64,
}

impl std::ops::AddAssign for MatVecCounts {
    fn add_assign(&mut self, o: Self) {
        self.full += o.full;
        self.coarse += o.coarse;
        self.fine += o.fine;
    }
}

/// Start-up `z_1 = z_0 + dt M^{1/2} v_0 + dt²/2 (F_0 - A z_0)`.
pub fn leapfrog_init(
    a: &CsrMatrix,
    z0: &[f64],
    mhalf_v0: &[f64],
    f0: Option<&[f64]>,
    dt: f64,
) -> WaveState {
    leapfrog_init_signed(a, z0, mhalf_v0, f0, dt, 1.0)
}

/// Start-up with an explicit sign on the velocity term. Only `+1` is
/// consistent; `-1` is kept to document that it loses second order.
pub fn leapfrog_init_signed(
    a: &CsrMatrix,
    z0: &[f64],
    mhalf_v0: &[f64],
    f0: Option<&[f64]>,
    dt: f64,
    velocity_sign: f64,
) -> WaveState {
    let az = a.mul_vec(z0);
    let half = 0.5 * dt * dt;
    let z1 = (0..z0.len())
        .map(|i| {
            let f = f0.map_or(0.0, |f| f[i]);
            z0[i] + velocity_sign * dt * mhalf_v0[i] + half * (f - az[i])
        })
        .collect();
    WaveState {
        z_prev: z0.to_vec(),
        z_curr: z1,
        t: dt,
        dt,
        step: 1,
    }
}

/// One step reusing `az` as scratch; no finiteness check.
pub(crate) fn leapfrog_advance(
    a: &CsrMatrix,
    state: &mut WaveState,
    f: Option<&[f64]>,
    az: &mut [f64],
) {
    a.mul_vec_into(&state.z_curr, az);
    let dt2 = state.dt * state.dt;
    for i in 0..state.z_curr.len() {
        let fi = f.map_or(0.0, |f| f[i]);
        let next = 2.0 * state.z_curr[i] - state.z_prev[i] + dt2 * (fi - az[i]);
        state.z_prev[i] = next;
    }
    std::mem::swap(&mut state.z_prev, &mut state.z_curr);
    state.step += 1;
    state.t += state.dt;
}

/// `z_{n+1} = 2 z_n - z_{n-1} + dt² (F_n - A z_n)`.
pub fn leapfrog_step(a: &CsrMatrix, state: &mut WaveState, f: Option<&[f64]>) -> Result<()> {
    let mut az = vec![0.0; state.dim()];
    leapfrog_advance(a, state, f, &mut az);
    check_finite(state)
}

pub(crate) fn check_finite(state: &WaveState) -> Result<()> {
    if state.z_curr.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Instability {
            step: state.step,
            time: state.t,
        })
    }
}

/// `½ ‖(z_curr - z_prev)/dt‖² + ½ ⟨A z_curr, z_prev⟩`, conserved by leapfrog.
pub fn discrete_energy(a: &CsrMatrix, z_prev: &[f64], z_curr: &[f64], dt: f64) -> f64 {
    let az = a.mul_vec(z_curr);
    let kinetic: f64 = z_curr
        .iter()
        .zip(z_prev)
        .map(|(c, p)| ((c - p) / dt).powi(2))
        .sum();
    let potential: f64 = az.iter().zip(z_prev).map(|(a, p)| a * p).sum();
    0.5 * kinetic + 0.5 * potential
}
