//! Quantities of interest on a fixed output grid.

use std::ops::{AddAssign, Sub};

use crate::error::{Error, Result};
use crate::mesh::{Mesh1D, TriMesh};

/// `n` equispaced points on `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputGrid {
    pub start: f64,
    pub end: f64,
    pub n_points: usize,
}

impl OutputGrid {
    pub fn new(start: f64, end: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 || !(end > start) {
            return Err(Error::invalid(format!(
                "output grid needs at least 2 points on a nonempty interval, got {n_points} on [{start}, {end}]"
            )));
        }
        Ok(Self {
            start,
            end,
            n_points,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.end - self.start) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.end
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// Trapezoid weights.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n_points {
            0.5 * self.spacing()
        } else {
            self.spacing()
        }
    }
}

/// Values on an [`OutputGrid`] with the discrete L² norm.
#[derive(Clone, Debug, PartialEq)]
pub struct QoIVector {
    pub grid: OutputGrid,
    pub values: Vec<f64>,
}

impl QoIVector {
    pub fn zeros(grid: OutputGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_points],
            grid,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.weight(i) * v * v)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

impl Sub for &QoIVector {
    type Output = QoIVector;

    fn sub(self, rhs: &QoIVector) -> QoIVector {
        assert_eq!(self.grid, rhs.grid, "QoIs live on different grids");
        QoIVector {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl AddAssign<&QoIVector> for QoIVector {
    fn add_assign(&mut self, rhs: &QoIVector) {
        assert_eq!(self.grid, rhs.grid, "QoIs live on different grids");
        self.values
            .iter_mut()
            .zip(&rhs.values)
            .for_each(|(a, b)| *a += b);
    }
}

/// Precomputed P1 interpolation weights from mesh nodes to grid points.
#[derive(Clone, Debug)]
pub struct Interpolator {
    grid: OutputGrid,
    stencils: Vec<Vec<(usize, f64)>>,
}

impl Interpolator {
    pub fn grid(&self) -> OutputGrid {
        self.grid
    }

    /// 1D: grid points along the interval mesh.
    pub fn on_interval(mesh: &Mesh1D, grid: OutputGrid) -> Result<Self> {
        let stencils = grid
            .points()
            .map(|x| {
                let e = mesh
                    .locate(x)
                    .ok_or(Error::PointOutsideMesh { x, y: 0.0 })?;
                let (a, b) = (mesh.vertices[e], mesh.vertices[e + 1]);
                let s = ((x - a) / (b - a)).clamp(0.0, 1.0);
                Ok(vec![(e, 1.0 - s), (e + 1, s)])
            })
            .collect::<Result<_>>()?;
        Ok(Self { grid, stencils })
    }

    /// 2D: grid points on the vertical line `x = line_x`, grid ordinates as `y`.
    pub fn on_vertical_line(mesh: &TriMesh, line_x: f64, grid: OutputGrid) -> Result<Self> {
        let locator = PointLocator::new(mesh);
        let stencils = grid
            .points()
            .map(|y| {
                let (t, bary) = locator.locate(mesh, [line_x, y])?;
                let tri = mesh.triangles[t];
                Ok((0..3).map(|k| (tri[k], bary[k])).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { grid, stencils })
    }

    pub fn apply(&self, nodal: &[f64]) -> QoIVector {
        QoIVector {
            grid: self.grid,
            values: self
                .stencils
                .iter()
                .map(|s| s.iter().map(|&(i, w)| w * nodal[i]).sum())
                .collect(),
        }
    }
}

/// P1 interpolation of nodal values of a 1D solution onto the grid.
pub fn restrict_to_grid(mesh: &Mesh1D, nodal: &[f64], grid: OutputGrid) -> Result<QoIVector> {
    Ok(Interpolator::on_interval(mesh, grid)?.apply(nodal))
}

/// P1 trace of a 2D solution along `x = line_x`.
pub fn extract_line_qoi(
    mesh: &TriMesh,
    nodal: &[f64],
    line_x: f64,
    grid: OutputGrid,
) -> Result<QoIVector> {
    Ok(Interpolator::on_vertical_line(mesh, line_x, grid)?.apply(nodal))
}

/// Uniform bucket grid over the bounding box for point-in-triangle queries.
pub struct PointLocator {
    origin: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &TriMesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &mesh.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let side = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut locator = Self {
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); side * side],
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|i| mesh.vertices[i]);
            let bx = [
                p[0][0].min(p[1][0]).min(p[2][0]),
                p[0][0].max(p[1][0]).max(p[2][0]),
            ];
            let by = [
                p[0][1].min(p[1][1]).min(p[2][1]),
                p[0][1].max(p[1][1]).max(p[2][1]),
            ];
            let (i0, j0) = locator.bucket([bx[0], by[0]]);
            let (i1, j1) = locator.bucket([bx[1], by[1]]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    locator.buckets[j * dims[0] + i].push(t);
                }
            }
        }
        locator
    }

    fn bucket(&self, p: [f64; 2]) -> (usize, usize) {
        let f = |k: usize| {
            let r = ((p[k] - self.origin[k]) / self.cell[k]).floor();
            (r.max(0.0) as usize).min(self.dims[k] - 1)
        };
        (f(0), f(1))
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, mesh: &TriMesh, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        let (i, j) = self.bucket(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let v = mesh.triangles[t].map(|k| mesh.vertices[k]);
            let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
                - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
            let l1 = ((p[0] - v[0][0]) * (v[2][1] - v[0][1])
                - (v[2][0] - v[0][0]) * (p[1] - v[0][1]))
                / det;
            let l2 = ((v[1][0] - v[0][0]) * (p[1] - v[0][1])
                - (p[0] - v[0][0]) * (v[1][1] - v[0][1]))
                / det;
            let bary = [1.0 - l1 - l2, l1, l2];
            let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -TOL && best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((t, bary, worst));
            }
        }
        best.map(|(t, b, _)| (t, b))
            .ok_or(Error::PointOutsideMesh { x: p[0], y: p[1] })
    }
}
