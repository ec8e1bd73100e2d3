//! Spatial meshes: refined intervals, the 2D channel geometry and graded L-shapes.

pub mod channel;
pub mod graded;
pub mod interval;
pub mod io;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use channel::{
    apply_channel_transform, build_channel_mesh, move_vertices, ChannelGeometry, ChannelMesh,
    Jacobian,
};
pub use graded::{build_graded_lshape, graded_layer_sizes, GradedMeshParams};
pub use interval::{
    build_hierarchy, build_refined_interval, refinement_ratio, Mesh1D, MeshHierarchy,
};

/// Conforming triangulation with counter-clockwise triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Per triangle: part of the refined region.
    pub fine_flags: Vec<bool>,
    /// Per vertex: lies on the domain boundary.
    pub boundary: Vec<bool>,
}

impl TriMesh {
    /// Builds a mesh and derives the boundary marks from the edge multiplicities.
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, fine_flags: Vec<bool>) -> Self {
        let mut mesh = Self {
            boundary: vec![false; vertices.len()],
            vertices,
            triangles,
            fine_flags,
        };
        for (a, b) in mesh.boundary_edges() {
            mesh.boundary[a] = true;
            mesh.boundary[b] = true;
        }
        mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn fine_area(&self) -> f64 {
        (0..self.n_triangles())
            .filter(|&t| self.fine_flags[t])
            .map(|t| self.signed_area(t))
            .sum()
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(3 * self.triangles.len() / 2 + 16);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .edge_counts()
            .into_iter()
            .filter(|&(_, n)| n == 1)
            .map(|(e, _)| e)
            .collect();
        edges.sort_unstable();
        edges
    }

    /// `V - E + F` over vertices used by at least one triangle.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        self.triangles
            .iter()
            .flatten()
            .for_each(|&v| used[v] = true);
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_counts().len() as i64;
        v - e + self.triangles.len() as i64
    }

    /// Positive areas, manifold edges, closed boundary loops and the expected
    /// Euler characteristic (1 for a simply connected polygon). A hanging
    /// node breaks the Euler count, so this also certifies conformity.
    pub fn validate(&self, expected_euler: i64) -> Result<()> {
        if self.fine_flags.len() != self.triangles.len() {
            return Err(Error::Geometry(
                "fine flag count does not match triangles".into(),
            ));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.vertices.len()) {
                return Err(Error::Geometry(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(Error::Geometry(format!(
                    "triangle {t} has signed area {area}"
                )));
            }
        }
        let counts = self.edge_counts();
        if let Some((e, n)) = counts.iter().find(|(_, &n)| n > 2) {
            return Err(Error::Geometry(format!(
                "edge {e:?} shared by {n} triangles"
            )));
        }
        let mut degree = vec![0usize; self.vertices.len()];
        for ((a, b), _) in counts.iter().filter(|(_, &n)| n == 1) {
            degree[*a] += 1;
            degree[*b] += 1;
        }
        if let Some(v) = degree.iter().position(|&d| d != 0 && d != 2) {
            return Err(Error::Geometry(format!(
                "boundary is not a closed curve at vertex {v}"
            )));
        }
        let chi = self.euler_characteristic();
        if chi != expected_euler {
            return Err(Error::Geometry(format!(
                "Euler characteristic {chi}, expected {expected_euler} (hanging node or hole)"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![false, true],
        )
    }

    #[test]
    fn square_is_valid() {
        let m = unit_square();
        m.validate(1).unwrap();
        assert_eq!(m.total_area(), 1.0);
        assert_eq!(m.fine_area(), 0.5);
        assert!(m.boundary.iter().all(|&b| b));
    }

    #[test]
    fn hanging_node_is_detected() {
        // right half split at the midpoint (1, 0.5) without splitting the left triangle
        let m = TriMesh::new(
            vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [0.0, 1.0],
                [0.5, 0.5],
                [2.0, 0.0],
                [2.0, 1.0],
            ],
            vec![[0, 1, 2], [0, 2, 3], [1, 5, 6], [1, 6, 2]],
            vec![false; 4],
        );
        m.validate(1).unwrap();
        // (1, 1) sits on the edge (1, 0)-(1, 2) of the left triangle
        let hanging = TriMesh::new(
            vec![[0.0, 1.0], [1.0, 0.0], [1.0, 2.0], [1.0, 1.0], [2.0, 1.0]],
            vec![[0, 1, 2], [1, 4, 3], [3, 4, 2]],
            vec![false; 3],
        );
        assert!(hanging.validate(1).is_err());
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let m = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![false],
        );
        assert!(m.validate(1).is_err());
    }
}
