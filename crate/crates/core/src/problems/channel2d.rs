//! Two rectangles joined by a channel of random width, unit wave speed.

use crate::cost::{pair_cost_lf, pair_cost_lts, RefinementParams};
use crate::error::{Error, Result};
use crate::fem::{assemble_2d, project_initial, DiscreteOperator, Interpolator, OutputGrid};
use crate::integrators::{MatVecCounts, DEFAULT_NU};
use crate::mesh::{
    build_channel_mesh, move_vertices, refinement_ratio, ChannelGeometry, ChannelMesh, TriMesh,
};
use crate::mlmc::{LevelProblem, Solve};
use crate::problems::{integrate, plan_level, LazyLevels, LevelPlan, Scheme};
use crate::rng::{
    sample_width, FieldSample, RngStream, CHANNEL_REFERENCE_WIDTH, CHANNEL_WIDTH_RANGE,
};

/// Area of the reference domain: two `0.95 x 1` rectangles and the channel.
pub const CHANNEL_DOMAIN_AREA: f64 = 2.0 * 0.95 + 0.1 * CHANNEL_REFERENCE_WIDTH;

const PULSE_CENTER: [f64; 2] = [0.5, 0.0];
const PULSE_RADIUS: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSetup {
    pub h0: f64,
    pub h_f: f64,
    pub t_final: f64,
    pub max_level: usize,
    pub scheme: Scheme,
    pub safety: f64,
    pub grid_points: usize,
    pub line_x: f64,
}

impl Default for ChannelSetup {
    fn default() -> Self {
        Self {
            h0: 1.0 / 60.0,
            h_f: 7.6e-4,
            t_final: 1.0,
            max_level: 4,
            scheme: Scheme::Lts { nu: DEFAULT_NU },
            safety: 0.9,
            grid_points: 512,
            line_x: -0.4,
        }
    }
}

impl ChannelSetup {
    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    /// The refined region is taken as the channel itself.
    pub fn cost_params(&self) -> RefinementParams {
        RefinementParams {
            dim: 2,
            r: 0.1 * CHANNEL_REFERENCE_WIDTH / CHANNEL_DOMAIN_AREA,
            p0: refinement_ratio(self.h0, self.h_f) as f64,
            h0: self.h0,
            degree: 1,
            t_final: self.t_final,
        }
    }
}

/// Smooth bump `exp(1 - R²/(R² - |x - x0|²))` supported in the disc of radius `R`.
pub fn channel_initial_displacement(p: [f64; 2]) -> f64 {
    let r2 = (p[0] - PULSE_CENTER[0]).powi(2) + (p[1] - PULSE_CENTER[1]).powi(2);
    let big = PULSE_RADIUS * PULSE_RADIUS;
    if r2 < big {
        (1.0 - big / (big - r2)).exp()
    } else {
        0.0
    }
}

#[derive(Debug)]
struct LevelData {
    mesh: ChannelMesh,
    interpolator: Interpolator,
    plan: LevelPlan,
}

/// Meshes are built on first use of a level, so deep levels cost nothing
/// until the estimator reaches them.
#[derive(Debug)]
pub struct ChannelProblem {
    setup: ChannelSetup,
    grid: OutputGrid,
    levels: LazyLevels<LevelData>,
}

impl ChannelProblem {
    pub fn new(setup: ChannelSetup) -> Result<Self> {
        if !(setup.t_final > 0.0) {
            return Err(Error::invalid(format!(
                "final time {} must be positive",
                setup.t_final
            )));
        }
        if let Scheme::Lts { nu } = setup.scheme {
            if !(0.0..=1.0).contains(&nu) {
                return Err(Error::invalid(format!(
                    "stabilization nu = {nu} outside [0, 1]"
                )));
            }
        }
        if !(-1.0 < setup.line_x && setup.line_x < -0.1) {
            return Err(Error::invalid(format!(
                "QoI line x = {} must lie in the left rectangle, away from the moving region",
                setup.line_x
            )));
        }
        let grid = OutputGrid::new(-0.5, 0.5, setup.grid_points)?;
        Ok(Self {
            levels: LazyLevels::new(setup.max_level + 1),
            setup,
            grid,
        })
    }

    pub fn setup(&self) -> &ChannelSetup {
        &self.setup
    }

    pub fn coarse_size(&self, level: usize) -> f64 {
        self.setup.h0 / 2f64.powi(level as i32)
    }

    pub fn level_plan(&self, level: usize) -> Result<LevelPlan> {
        Ok(self.level(level)?.plan)
    }

    pub fn mesh(&self, level: usize) -> Result<&ChannelMesh> {
        Ok(&self.level(level)?.mesh)
    }

    fn assemble(mesh: &TriMesh, width: f64) -> Result<(TriMesh, DiscreteOperator)> {
        let moved = move_vertices(mesh, &ChannelGeometry::new(width))?;
        let op = assemble_2d(&moved, |_| Ok(1.0), None)?;
        Ok((moved, op))
    }

    /// Nodal solution at the final time for channel width `width`.
    pub fn solve_nodal(&self, level: usize, width: f64) -> Result<(Vec<f64>, MatVecCounts)> {
        let data = self.level(level)?;
        let (moved, op) = Self::assemble(&data.mesh.mesh, width)?;
        let (z0, w0) = project_initial(
            &moved.vertices,
            &op.mass,
            channel_initial_displacement,
            |_| 0.0,
        );
        integrate(
            &op,
            self.setup.scheme,
            data.plan,
            &z0,
            &w0,
            self.setup.t_final,
        )
    }

    fn level(&self, level: usize) -> Result<&LevelData> {
        self.levels.get_or_try(level, || {
            let h = self.coarse_size(level);
            // the fine size never exceeds the coarse size
            let mesh = build_channel_mesh(h.max(self.setup.h_f), self.setup.h_f.min(h))?;
            let (lo, hi) = CHANNEL_WIDTH_RANGE;
            let worst = [lo, CHANNEL_REFERENCE_WIDTH, hi]
                .iter()
                .map(|&b| Self::assemble(&mesh.mesh, b).map(|(_, op)| op))
                .collect::<Result<Vec<_>>>()?;
            let plan = plan_level(
                &worst,
                self.setup.scheme,
                h,
                self.setup.h_f,
                self.setup.safety,
            )?;
            // the QoI line is left of the moving region, so the reference
            // mesh locates it for every width
            let interpolator =
                Interpolator::on_vertical_line(&mesh.mesh, self.setup.line_x, self.grid)?;
            Ok(LevelData {
                mesh,
                interpolator,
                plan,
            })
        })
    }
}

impl LevelProblem for ChannelProblem {
    type Input = f64;

    fn grid(&self) -> OutputGrid {
        self.grid
    }

    fn max_level(&self) -> usize {
        self.setup.max_level
    }

    fn draw(&self, stream: &mut RngStream) -> f64 {
        match sample_width(stream) {
            FieldSample::ChannelWidth { width } => width,
            _ => unreachable!("width sampler returns a width"),
        }
    }

    fn solve(&self, level: usize, width: &f64) -> Result<Solve> {
        let (nodal, counts) = self.solve_nodal(level, *width)?;
        Ok(Solve {
            qoi: self.level(level)?.interpolator.apply(&nodal),
            counts,
        })
    }

    fn model_cost(&self, level: usize) -> f64 {
        let params = self.setup.cost_params();
        match self.setup.scheme {
            Scheme::Leapfrog => pair_cost_lf(&params, level),
            Scheme::Lts { .. } => pair_cost_lts(&params, level),
        }
    }
}
