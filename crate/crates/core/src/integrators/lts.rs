//! Stabilized leapfrog local time-stepping.
//!
//! Nodes whose stiffness rows never touch a fine node see the fine update only
//! through the constant `w = A(I-P) z_n`, and the local recurrence then
//! collapses to `q_1 = z_n - dt²/2 w`. Those nodes take the plain leapfrog
//! update; the `p` local steps run on the remaining "active" nodes only.

use crate::error::{Error, Result};
use crate::fem::{
    power_iteration, CsrMatrix, DiscreteOperator, POWER_MAX_ITERATIONS, POWER_TOLERANCE,
};
use crate::integrators::chebyshev::ChebyshevConstants;
use crate::integrators::leapfrog::{MatVecCounts, WaveState};

/// `A` split by the selector into `A(I-P)` and the active block of `A P`.
#[derive(Clone, Debug)]
pub struct LtsOperator {
    dim: usize,
    coarse_part: CsrMatrix,
    /// Global indices of rows of `A P` with a nonzero entry.
    active: Vec<usize>,
    /// `A P` restricted to active rows and columns, in local numbering.
    fine_block: CsrMatrix,
}

impl LtsOperator {
    pub fn new(a: &CsrMatrix, selector: &[bool]) -> Result<Self> {
        let n = a.n_rows();
        if selector.len() != n {
            return Err(Error::invalid(
                "selector length does not match the operator",
            ));
        }
        let coarse_part = a.filter(|_| true, |j| !selector[j]);
        let active: Vec<usize> = (0..n)
            .filter(|&i| selector[i] || a.row(i).any(|(j, _)| selector[j]))
            .collect();
        let mut local = vec![usize::MAX; n];
        for (k, &i) in active.iter().enumerate() {
            local[i] = k;
        }
        let triplets = active
            .iter()
            .enumerate()
            .flat_map(|(k, &i)| {
                a.row(i)
                    .filter(|&(j, _)| selector[j])
                    .map(|(j, v)| (k, local[j], v))
                    .collect::<Vec<_>>()
            })
            .collect();
        let m = active.len();
        Ok(Self {
            dim: n,
            coarse_part,
            active,
            fine_block: CsrMatrix::from_triplets(m, m, triplets),
        })
    }

    pub fn from_operator(op: &DiscreteOperator) -> Result<Self> {
        Self::new(&op.normalized, &op.selector)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }
}

/// LTS time stepper owning its scratch vectors.
#[derive(Clone, Debug)]
pub struct LtsStepper<'a> {
    op: &'a LtsOperator,
    consts: ChebyshevConstants,
    w: Vec<f64>,
    wl: Vec<f64>,
    q: [Vec<f64>; 3],
    apq: Vec<f64>,
    pub counts: MatVecCounts,
}

impl<'a> LtsStepper<'a> {
    pub fn new(op: &'a LtsOperator, consts: ChebyshevConstants) -> Self {
        let m = op.n_active();
        Self {
            op,
            consts,
            w: vec![0.0; op.dim],
            wl: vec![0.0; m],
            q: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            apq: vec![0.0; m],
            counts: MatVecCounts::default(),
        }
    }

    pub fn constants(&self) -> &ChebyshevConstants {
        &self.consts
    }

    /// Runs the `p` local steps from `z` on the active nodes; leaves `q_1` in `self.q[1]`
    /// and `w = A(I-P) z` in `self.w`.
    fn local_steps(&mut self, z: &[f64], dt: f64) {
        let op = self.op;
        op.coarse_part.mul_vec_into(z, &mut self.w);
        self.counts.coarse += 1;
        let c = &self.consts;
        let p = c.p as f64;
        let h2 = (dt / p) * (dt / p);
        for (k, &i) in op.active.iter().enumerate() {
            self.q[0][k] = z[i];
            self.wl[k] = self.w[i];
        }
        let [q_prev, q_curr, q_next] = &mut self.q;
        op.fine_block.mul_vec_into(q_prev, &mut self.apq);
        let first = 0.5 * h2 * (2.0 * p * p / (c.omega * c.delta));
        for k in 0..q_prev.len() {
            q_curr[k] = q_prev[k] - first * (self.wl[k] + self.apq[k]);
        }
        for m in 1..c.p {
            let beta = c.beta_int[m - 1];
            let coef = h2 * (2.0 * p * p / c.omega) * c.beta_half[m - 1];
            op.fine_block.mul_vec_into(q_curr, &mut self.apq);
            for k in 0..q_curr.len() {
                q_next[k] =
                    (1.0 + beta) * q_curr[k] - beta * q_prev[k] - coef * (self.wl[k] + self.apq[k]);
            }
            std::mem::swap(q_prev, q_curr);
            std::mem::swap(q_curr, q_next);
        }
        self.counts.fine += c.p as u64;
    }

    /// Effective operator of one step, `A_p z = 2 (z - q_1(z)) / dt²`, so that
    /// `z_{n+1} = 2 z_n - z_{n-1} - dt² A_p z_n`.
    pub fn apply_effective(&mut self, z: &[f64], dt: f64, out: &mut [f64]) {
        self.local_steps(z, dt);
        let scale = 2.0 / (dt * dt);
        // inactive rows: q_1 = z - dt²/2 w
        out.copy_from_slice(&self.w[..z.len()]);
        for (k, &i) in self.op.active.iter().enumerate() {
            out[i] = scale * (z[i] - self.q[1][k]);
        }
    }

    /// Start-up `z_1 = q_1(z_0) + dt M^{1/2} v_0`.
    pub fn start(&mut self, z0: &[f64], mhalf_v0: &[f64], dt: f64) -> WaveState {
        self.local_steps(z0, dt);
        let half = 0.5 * dt * dt;
        // inactive nodes: same expression as the leapfrog start-up
        let mut z1: Vec<f64> = (0..z0.len())
            .map(|i| z0[i] + dt * mhalf_v0[i] + half * (0.0 - self.w[i]))
            .collect();
        for (k, &i) in self.op.active.iter().enumerate() {
            z1[i] = self.q[1][k] + dt * mhalf_v0[i];
        }
        WaveState {
            z_prev: z0.to_vec(),
            z_curr: z1,
            t: dt,
            dt,
            step: 1,
        }
    }

    /// `z_{n+1} = -z_{n-1} + 2 q_1`; no finiteness check.
    pub fn advance(&mut self, state: &mut WaveState) {
        let dt = state.dt;
        self.local_steps(&state.z_curr, dt);
        let active = &self.op.active;
        let [scratch, q1, _] = &mut self.q;
        for (k, &i) in active.iter().enumerate() {
            scratch[k] = -state.z_prev[i] + 2.0 * q1[k];
        }
        let dt2 = dt * dt;
        for i in 0..state.z_curr.len() {
            state.z_prev[i] = 2.0 * state.z_curr[i] - state.z_prev[i] + dt2 * (0.0 - self.w[i]);
        }
        for (k, &i) in active.iter().enumerate() {
            state.z_prev[i] = scratch[k];
        }
        std::mem::swap(&mut state.z_prev, &mut state.z_curr);
        state.step += 1;
        state.t += dt;
    }
}

/// Largest eigenvalue of the effective LTS operator at step `dt`; the scheme
/// is stable when `dt² λ < 4`.
pub fn lts_max_eigenvalue(op: &LtsOperator, consts: &ChebyshevConstants, dt: f64) -> Result<f64> {
    let mut stepper = LtsStepper::new(op, consts.clone());
    power_iteration(
        op.dim,
        |x, y| stepper.apply_effective(x, dt, y),
        POWER_TOLERANCE,
        POWER_MAX_ITERATIONS,
    )
}

/// One LTS step with freshly allocated scratch.
pub fn lts_step(
    op: &LtsOperator,
    state: &mut WaveState,
    consts: &ChebyshevConstants,
) -> Result<MatVecCounts> {
    let mut stepper = LtsStepper::new(op, consts.clone());
    stepper.advance(state);
    crate::integrators::leapfrog::check_finite(state)?;
    Ok(stepper.counts)
}
