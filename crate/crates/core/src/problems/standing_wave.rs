//! Manufactured standing wave `cos(πx/3) cos(πt/3)` on `(0, 6)`, `c = 1`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::fem::{assemble_1d, project_initial};
use crate::mesh::build_refined_interval;
use crate::problems::{integrate, plan_level, Scheme};
use crate::rng::DOMAIN_1D;

const WAVENUMBER: f64 = PI / 3.0;
const FINAL_TIME: f64 = 2.0;
/// Coarse size of the first mesh; the fine region is `[4, 4.5]` with `h = H/4`.
const FIRST_SIZE: f64 = 0.25;
const FINE_RATIO: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StandingWaveError {
    /// Coarse mesh size.
    pub h: f64,
    /// Lumped L² error at the final time.
    pub error: f64,
}

fn exact(x: f64, t: f64) -> f64 {
    (WAVENUMBER * x).cos() * (WAVENUMBER * t).cos()
}

/// Errors on `refinements + 1` locally refined meshes, halving all sizes each time.
pub fn standing_wave_errors(scheme: Scheme, refinements: usize) -> Result<Vec<StandingWaveError>> {
    (0..=refinements)
        .map(|j| {
            let h = FIRST_SIZE / 2f64.powi(j as i32);
            let h_f = h / FINE_RATIO;
            let mesh = build_refined_interval(DOMAIN_1D, h, Some((4.0, 4.5)), h_f)?;
            let op = assemble_1d(&mesh, |_| Ok(1.0))?;
            let plan = plan_level(std::slice::from_ref(&op), scheme, h, h_f, 0.9)?;
            let (z0, w0) = project_initial(&mesh.vertices, &op.mass, |x| exact(x, 0.0), |_| 0.0);
            let (u, _) = integrate(&op, scheme, plan, &z0, &w0, FINAL_TIME)?;
            let error = mesh
                .vertices
                .iter()
                .zip(&u)
                .zip(&op.mass)
                .map(|((&x, &v), m)| m * (v - exact(x, FINAL_TIME)).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(StandingWaveError { h, error })
        })
        .collect()
}

/// Least-squares slope of `log error` against `log h`.
pub fn observed_order(errors: &[StandingWaveError]) -> f64 {
    let x: Vec<f64> = errors.iter().map(|e| e.h.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.error.ln()).collect();
    crate::cost::fitted_slope(&x, &y)
}
