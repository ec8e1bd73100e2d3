//! Meshes graded toward the reentrant corner of an L-shaped domain.
//!
//! The L-shape `[0,1]² \ (0.5,1]²` is split into six congruent triangles
//! meeting at the corner `(0.5, 0.5)`. Each is cut into `m` layers whose
//! distance from the corner grows like `(k/m)^s`.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradedMeshParams {
    pub layers: usize,
    pub grading: f64,
    pub dim: usize,
}

impl GradedMeshParams {
    pub fn new(layers: usize, grading: f64, dim: usize) -> Result<Self> {
        if layers < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 layers, got {layers}"
            )));
        }
        if !(grading >= 1.0) {
            return Err(Error::invalid(format!(
                "grading exponent must be >= 1, got {grading}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self {
            layers,
            grading,
            dim,
        })
    }
}

/// Layer widths `h_k = (k^s - (k-1)^s) / (2 m^s)` for `k = 1..=m`.
pub fn graded_layer_sizes(params: &GradedMeshParams) -> Vec<f64> {
    let m = params.layers as f64;
    let s = params.grading;
    let scale = 2.0 * m.powf(s);
    (1..=params.layers)
        .map(|k| {
            let k = k as f64;
            (k.powf(s) - (k - 1.0).powf(s)) / scale
        })
        .collect()
}

/// Number of elements in layer `k`, `k^d - (k-1)^d` per macro simplex.
pub fn graded_layer_counts(params: &GradedMeshParams) -> Vec<usize> {
    let d = params.dim as u32;
    (1..=params.layers)
        .map(|k| k.pow(d) - (k - 1).pow(d))
        .collect()
}

const CORNER: [f64; 2] = [0.5, 0.5];
/// Boundary points in counter-clockwise order as seen from the corner.
const RAYS: [[f64; 2]; 7] = [
    [1.0, 0.5],
    [1.0, 0.0],
    [0.5, 0.0],
    [0.0, 0.0],
    [0.0, 0.5],
    [0.0, 1.0],
    [0.5, 1.0],
];

/// The 2D graded triangulation with `6 m²` triangles. The innermost layer is flagged fine.
pub fn build_graded_lshape(params: &GradedMeshParams) -> Result<TriMesh> {
    if params.dim != 2 {
        return Err(Error::invalid(format!(
            "the L-shaped mesh is two-dimensional, got dimension {}",
            params.dim
        )));
    }
    let m = params.layers;
    let t: Vec<f64> = (0..=m)
        .map(|k| (k as f64 / m as f64).powf(params.grading))
        .collect();
    let point = |k: usize, i: usize, a: [f64; 2], b: [f64; 2]| -> [f64; 2] {
        let w = i as f64 / k as f64;
        let dir = [
            (1.0 - w) * (a[0] - CORNER[0]) + w * (b[0] - CORNER[0]),
            (1.0 - w) * (a[1] - CORNER[1]) + w * (b[1] - CORNER[1]),
        ];
        [CORNER[0] + t[k] * dir[0], CORNER[1] + t[k] * dir[1]]
    };

    let mut vertices = vec![CORNER];
    // ray_vertex[r][k] for k >= 1, shared between neighbouring macro triangles
    let mut ray_vertex = vec![vec![0usize; m + 1]; RAYS.len()];
    for (r, ray) in RAYS.iter().enumerate() {
        for k in 1..=m {
            ray_vertex[r][k] = vertices.len();
            vertices.push(point(k, 0, *ray, *ray));
        }
    }

    let mut triangles = Vec::with_capacity(6 * m * m);
    let mut fine_flags = Vec::with_capacity(6 * m * m);
    for sector in 0..6 {
        let (a, b) = (RAYS[sector], RAYS[sector + 1]);
        // layer[k][i], i = 0..=k
        let mut layer: Vec<Vec<usize>> = vec![vec![0]];
        for k in 1..=m {
            let mut row = Vec::with_capacity(k + 1);
            row.push(ray_vertex[sector][k]);
            for i in 1..k {
                row.push(vertices.len());
                vertices.push(point(k, i, a, b));
            }
            row.push(ray_vertex[sector + 1][k]);
            layer.push(row);
        }
        for k in 1..=m {
            let (inner, outer) = (&layer[k - 1], &layer[k]);
            for i in 0..k {
                triangles.push([inner[i.min(k - 1)], outer[i], outer[i + 1]]);
                fine_flags.push(k == 1);
                if i + 1 < k {
                    triangles.push([inner[i], outer[i + 1], inner[i + 1]]);
                    fine_flags.push(k == 1);
                }
            }
        }
    }
    // the six sectors run clockwise around the corner; flip to counter-clockwise
    for tri in triangles.iter_mut() {
        tri.swap(1, 2);
    }
    Ok(TriMesh::new(vertices, triangles, fine_flags))
}
