//! Random wave speed on `(0, 6)` with homogeneous Neumann conditions.

use crate::cost::{pair_cost_lf, pair_cost_lts, RefinementParams};
use crate::error::{Error, Result};
use crate::fem::{assemble_1d, project_initial, DiscreteOperator, Interpolator, OutputGrid};
use crate::integrators::DEFAULT_NU;
use crate::mesh::{build_hierarchy, MeshHierarchy};
use crate::mlmc::{LevelProblem, Solve};
use crate::problems::{integrate, plan_level, LazyLevels, LevelPlan, Scheme};
use crate::rng::{kl_max_deviation, sample_jump, sample_kl, FieldSample, RngStream, DOMAIN_1D};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wave1dKind {
    /// Karhunen-Loève expansion of `c²`.
    Smooth,
    /// `c = 1` left of a random jump position, `c = 2` right of it.
    Jump,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Wave1dSetup {
    pub kind: Wave1dKind,
    pub h0: f64,
    pub h_f: f64,
    pub fine_region: (f64, f64),
    pub t_final: f64,
    pub max_level: usize,
    pub scheme: Scheme,
    pub safety: f64,
    pub grid_points: usize,
}

/// Output grid points: spacing `2^-9` on `[0, 6]`.
pub const DEFAULT_GRID_POINTS_1D: usize = 3073;

impl Wave1dSetup {
    pub fn smooth() -> Self {
        let h0 = 1.0 / 16.0;
        Self {
            kind: Wave1dKind::Smooth,
            h0,
            h_f: 1.0 / 256.0,
            fine_region: (5.0 - h0, 5.0),
            t_final: 11.0,
            max_level: 6,
            scheme: Scheme::Lts { nu: DEFAULT_NU },
            safety: 0.9,
            grid_points: DEFAULT_GRID_POINTS_1D,
        }
    }

    pub fn jump() -> Self {
        let h0 = 1.0 / 16.0;
        Self {
            kind: Wave1dKind::Jump,
            h0,
            h_f: 1.0 / 512.0,
            fine_region: (4.0 - h0, 4.0),
            t_final: 6.0,
            max_level: 6,
            scheme: Scheme::Lts { nu: DEFAULT_NU },
            safety: 0.9,
            grid_points: DEFAULT_GRID_POINTS_1D,
        }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    /// Largest `c²` any sample can take.
    fn speed2_bound(&self) -> f64 {
        match self.kind {
            Wave1dKind::Smooth => 1.0 + kl_max_deviation(),
            Wave1dKind::Jump => 4.0,
        }
    }

    pub fn cost_params(&self) -> RefinementParams {
        let (a, b) = DOMAIN_1D;
        RefinementParams {
            dim: 1,
            r: (self.fine_region.1 - self.fine_region.0) / (b - a),
            p0: crate::mesh::refinement_ratio(self.h0, self.h_f) as f64,
            h0: self.h0,
            degree: 1,
            t_final: self.t_final,
        }
    }
}

fn initial_displacement(x: f64) -> f64 {
    (-(x - 3.0).powi(2) / 0.09).exp()
}

#[derive(Debug)]
struct LevelData {
    interpolator: Interpolator,
    plan: LevelPlan,
}

#[derive(Debug)]
pub struct Wave1dProblem {
    setup: Wave1dSetup,
    hierarchy: MeshHierarchy,
    grid: OutputGrid,
    levels: LazyLevels<LevelData>,
}

impl Wave1dProblem {
    pub fn new(setup: Wave1dSetup) -> Result<Self> {
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
        if !(setup.h_f > 0.0 && setup.h_f <= setup.h0) {
            return Err(Error::invalid(format!(
                "need 0 < h_f <= H0, got h_f = {}, H0 = {}",
                setup.h_f, setup.h0
            )));
        }
        let hierarchy = build_hierarchy(
            DOMAIN_1D,
            setup.h0,
            setup.fine_region,
            setup.h_f,
            setup.max_level,
        )?;
        let grid = OutputGrid::new(DOMAIN_1D.0, DOMAIN_1D.1, setup.grid_points)?;
        Ok(Self {
            levels: LazyLevels::new(setup.max_level + 1),
            setup,
            hierarchy,
            grid,
        })
    }

    pub fn setup(&self) -> &Wave1dSetup {
        &self.setup
    }

    pub fn hierarchy(&self) -> &MeshHierarchy {
        &self.hierarchy
    }

    pub fn level_plan(&self, level: usize) -> Result<LevelPlan> {
        Ok(self.level(level)?.plan)
    }

    /// Operator of one sample on one level.
    pub fn operator(&self, level: usize, field: &FieldSample) -> Result<DiscreteOperator> {
        let mesh = self
            .hierarchy
            .levels
            .get(level)
            .ok_or_else(|| Error::invalid(format!("level {level} is beyond the hierarchy")))?;
        assemble_1d(mesh, |x| field.eval_speed_squared(x))
    }

    /// Nodal solution at the final time.
    pub fn solve_nodal(
        &self,
        level: usize,
        field: &FieldSample,
    ) -> Result<(Vec<f64>, crate::integrators::MatVecCounts)> {
        let data = self.level(level)?;
        let op = self.operator(level, field)?;
        let mesh = &self.hierarchy.levels[level];
        let (z0, w0) = project_initial(&mesh.vertices, &op.mass, initial_displacement, |_| 0.0);
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
            let mesh = &self.hierarchy.levels[level];
            let bound = self.setup.speed2_bound();
            let worst = assemble_1d(mesh, |_| Ok(bound))?;
            let plan = plan_level(
                &[worst],
                self.setup.scheme,
                self.hierarchy.coarse_sizes[level],
                self.setup.h_f,
                self.setup.safety,
            )?;
            Ok(LevelData {
                interpolator: Interpolator::on_interval(mesh, self.grid)?,
                plan,
            })
        })
    }
}

impl LevelProblem for Wave1dProblem {
    type Input = FieldSample;

    fn grid(&self) -> OutputGrid {
        self.grid
    }

    fn max_level(&self) -> usize {
        self.setup.max_level
    }

    fn draw(&self, stream: &mut RngStream) -> FieldSample {
        match self.setup.kind {
            Wave1dKind::Smooth => sample_kl(stream),
            Wave1dKind::Jump => sample_jump(stream, self.setup.h0),
        }
    }

    fn solve(&self, level: usize, input: &FieldSample) -> Result<Solve> {
        let (nodal, counts) = self.solve_nodal(level, input)?;
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
