//! Two rectangles joined by a narrow channel, and the random width transform.
//!
//! The reference domain is `[-1, -0.05] x [-0.5, 0.5]`, the channel
//! `[-0.05, 0.05] x [-0.002, 0.002]` and the mirror rectangle on the right.
//! The mesh is a balanced quadtree in integer index space, pushed to physical
//! coordinates by separable piecewise linear maps. Index-space knots sit on the
//! channel walls and mouths, so the walls are mesh lines at every level.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::rng::CHANNEL_REFERENCE_WIDTH;

const X_MOUTH: f64 = 0.05;
const X_BLEND_END: f64 = 0.1;
const Y_HALF: f64 = 0.5;
/// Distance from the channel at which the element size reaches `H`. The
/// transition belt scales with `H`, so every level refines it.
const TRANSITION_RADIUS: f64 = 0.05;

/// log2 of the integer units per top-level cell.
const MAX_DEPTH: u32 = 24;
const TOP: u64 = 1 << MAX_DEPTH;

#[derive(Clone, Debug)]
struct AxisMap {
    knots: Vec<(u64, f64)>,
}

impl AxisMap {
    fn eval(&self, u: u64) -> f64 {
        let i = self
            .knots
            .partition_point(|&(k, _)| k <= u)
            .clamp(1, self.knots.len() - 1);
        let (u0, x0) = self.knots[i - 1];
        let (u1, x1) = self.knots[i];
        if u == u1 {
            return x1;
        }
        x0 + (x1 - x0) * ((u - u0) as f64 / (u1 - u0) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cell {
    y0: u64,
    x0: u64,
    size: u64,
}

struct Layout {
    x_map: AxisMap,
    y_map: AxisMap,
    columns: u64,
    rows: u64,
    channel_x: (u64, u64),
    band_y: (u64, u64),
    coarse_size: f64,
    fine_size: f64,
}

impl Layout {
    fn new(h: f64, h_f: f64) -> Self {
        let wall = CHANNEL_REFERENCE_WIDTH / 2.0;
        let side = ((1.0 - X_MOUTH) / h).round().max(1.0) as u64;
        let middle = ((2.0 * X_MOUTH) / h).round().max(1.0) as u64;
        let columns = 2 * side + middle;
        let x_map = AxisMap {
            knots: vec![
                (0, -1.0),
                (side * TOP, -X_MOUTH),
                ((side + middle) * TOP, X_MOUTH),
                (columns * TOP, 1.0),
            ],
        };

        // Index offset of the channel wall from the centre line: a dyadic
        // fraction of the middle row when cells are much wider than the
        // channel, a whole number of rows otherwise.
        let depth = (h / wall).log2().round();
        let (half_rows, wall_offset) = if depth >= 1.0 {
            let j = (depth as u32).min(MAX_DEPTH);
            ((Y_HALF / h).round().max(1.0) as u64, TOP >> j)
        } else {
            let inner = (wall / h).round().max(1.0) as u64;
            let outer = ((Y_HALF - wall) / h).round().max(1.0) as u64;
            (inner + outer, inner * TOP)
        };
        let centre = half_rows * TOP;
        let y_map = AxisMap {
            knots: vec![
                (0, -Y_HALF),
                (centre - wall_offset, -wall),
                (centre + wall_offset, wall),
                (2 * centre, Y_HALF),
            ],
        };
        Self {
            x_map,
            y_map,
            columns,
            rows: 2 * half_rows,
            channel_x: (side * TOP, (side + middle) * TOP),
            band_y: (centre - wall_offset, centre + wall_offset),
            coarse_size: h,
            fine_size: h_f,
        }
    }

    fn in_middle_columns(&self, c: &Cell) -> bool {
        c.x0 >= self.channel_x.0 && c.x0 + c.size <= self.channel_x.1
    }

    fn is_hole(&self, c: &Cell) -> bool {
        self.in_middle_columns(c) && (c.y0 + c.size <= self.band_y.0 || c.y0 >= self.band_y.1)
    }

    fn straddles_wall(&self, c: &Cell) -> bool {
        let inside = |w: u64| c.y0 < w && w < c.y0 + c.size;
        self.in_middle_columns(c) && (inside(self.band_y.0) || inside(self.band_y.1))
    }

    /// Physical distance from the cell to the closed channel rectangle.
    fn channel_distance(&self, c: &Cell) -> f64 {
        let (x0, x1) = (self.x_map.eval(c.x0), self.x_map.eval(c.x0 + c.size));
        let (y0, y1) = (self.y_map.eval(c.y0), self.y_map.eval(c.y0 + c.size));
        let wall = CHANNEL_REFERENCE_WIDTH / 2.0;
        let dx = (x0 - X_MOUTH).max(-X_MOUTH - x1).max(0.0);
        let dy = (y0 - wall).max(-wall - y1).max(0.0);
        dx.hypot(dy)
    }

    fn physical_side(&self, c: &Cell) -> f64 {
        let dx = self.x_map.eval(c.x0 + c.size) - self.x_map.eval(c.x0);
        let dy = self.y_map.eval(c.y0 + c.size) - self.y_map.eval(c.y0);
        dx.max(dy)
    }

    /// `max(h_f, min(H, H r / ρ))` at distance `r` from the channel.
    fn target_size(&self, c: &Cell) -> f64 {
        let graded = self.coarse_size * self.channel_distance(c) / TRANSITION_RADIUS;
        graded.min(self.coarse_size).max(self.fine_size)
    }

    fn needs_split(&self, c: &Cell) -> bool {
        let target = self.target_size(c);
        // top cells may exceed H slightly through the axis maps
        let graded = target < self.coarse_size * (1.0 - 1e-9);
        self.straddles_wall(c) || (graded && self.physical_side(c) > target * (1.0 + 1e-9))
    }
}

fn children(c: &Cell) -> [Cell; 4] {
    let h = c.size / 2;
    [
        Cell {
            x0: c.x0,
            y0: c.y0,
            size: h,
        },
        Cell {
            x0: c.x0 + h,
            y0: c.y0,
            size: h,
        },
        Cell {
            x0: c.x0,
            y0: c.y0 + h,
            size: h,
        },
        Cell {
            x0: c.x0 + h,
            y0: c.y0 + h,
            size: h,
        },
    ]
}

struct Quadtree {
    leaves: HashSet<Cell>,
}

impl Quadtree {
    /// Leaf containing the unit square with lower-left corner `(px, py)`.
    fn find(&self, px: u64, py: u64) -> Option<Cell> {
        (0..=MAX_DEPTH).find_map(|k| {
            let size = 1u64 << k;
            let cell = Cell {
                x0: px & !(size - 1),
                y0: py & !(size - 1),
                size,
            };
            self.leaves.contains(&cell).then_some(cell)
        })
    }

    /// Leaves across the four edges of `c` (right, top, left, bottom), probed at the edge start.
    fn neighbours(&self, c: &Cell) -> [Option<Cell>; 4] {
        [
            self.find(c.x0 + c.size, c.y0),
            self.find(c.x0, c.y0 + c.size),
            c.x0.checked_sub(1).and_then(|x| self.find(x, c.y0)),
            c.y0.checked_sub(1).and_then(|y| self.find(c.x0, y)),
        ]
    }
}

/// A channel-geometry triangulation together with its construction sizes.
#[derive(Clone, Debug)]
pub struct ChannelMesh {
    pub mesh: TriMesh,
    pub coarse_size: f64,
    pub fine_size: f64,
    /// Deepest quadtree refinement level used.
    pub max_depth: u32,
}

/// Triangulates the reference domain with size `h` away from the channel and at
/// most `h_f` on every cell touching it. In between the size grows linearly
/// with the distance from the channel, reaching `h` at a fixed radius, and
/// neighbouring cells differ by at most a factor 2.
/// Triangles of refined cells carry the fine flag.
pub fn build_channel_mesh(h: f64, h_f: f64) -> Result<ChannelMesh> {
    if !(h_f > 0.0) || h_f > CHANNEL_REFERENCE_WIDTH / 2.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "fine size {h_f} must resolve the reference channel with at least 2 elements"
        )));
    }
    if !(h >= h_f) || h > Y_HALF {
        return Err(Error::invalid(format!(
            "coarse size {h} must lie in [{h_f}, 0.5]"
        )));
    }
    let layout = Layout::new(h, h_f);

    let mut leaves = HashSet::new();
    let mut stack: Vec<Cell> = Vec::new();
    for row in 0..layout.rows {
        for col in 0..layout.columns {
            stack.push(Cell {
                x0: col * TOP,
                y0: row * TOP,
                size: TOP,
            });
        }
    }
    while let Some(cell) = stack.pop() {
        if layout.is_hole(&cell) {
            continue;
        }
        if layout.needs_split(&cell) {
            if cell.size == 1 {
                return Err(Error::Geometry(
                    "channel refinement exceeded the depth limit".into(),
                ));
            }
            stack.extend(children(&cell));
        } else {
            leaves.insert(cell);
        }
    }

    let mut tree = Quadtree { leaves };
    balance(&mut tree, &layout);

    let mut cells: Vec<Cell> = tree.leaves.iter().copied().collect();
    cells.sort_unstable();
    let max_depth = cells
        .iter()
        .map(|c| MAX_DEPTH - c.size.trailing_zeros())
        .max()
        .unwrap_or(0);

    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |x: u64, y: u64| -> usize {
        *index.entry((x, y)).or_insert_with(|| {
            vertices.push([layout.x_map.eval(x), layout.y_map.eval(y)]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(2 * cells.len());
    let mut fine_flags = Vec::with_capacity(2 * cells.len());
    for c in &cells {
        let (x0, y0, s) = (c.x0, c.y0, c.size);
        let fine = s < TOP;
        let hanging = tree.neighbours(c).map(|n| n.is_some_and(|n| n.size < s));
        if hanging.iter().any(|&h| h) {
            let m = s / 2;
            // counter-clockwise boundary with the midpoints that exist
            let mut ring = vec![(x0, y0)];
            if hanging[3] {
                ring.push((x0 + m, y0));
            }
            ring.push((x0 + s, y0));
            if hanging[0] {
                ring.push((x0 + s, y0 + m));
            }
            ring.push((x0 + s, y0 + s));
            if hanging[1] {
                ring.push((x0 + m, y0 + s));
            }
            ring.push((x0, y0 + s));
            if hanging[2] {
                ring.push((x0, y0 + m));
            }
            let centre = vertex(x0 + m, y0 + m);
            let ids: Vec<usize> = ring.iter().map(|&(x, y)| vertex(x, y)).collect();
            for k in 0..ids.len() {
                triangles.push([centre, ids[k], ids[(k + 1) % ids.len()]]);
                fine_flags.push(fine);
            }
        } else {
            let bl = vertex(x0, y0);
            let br = vertex(x0 + s, y0);
            let tr = vertex(x0 + s, y0 + s);
            let tl = vertex(x0, y0 + s);
            // alternate the diagonal so the pattern is symmetric about both axes
            if ((x0 / s) + (y0 / s)) % 2 == 0 {
                triangles.push([bl, br, tr]);
                triangles.push([bl, tr, tl]);
            } else {
                triangles.push([bl, br, tl]);
                triangles.push([br, tr, tl]);
            }
            fine_flags.extend([fine, fine]);
        }
    }
    Ok(ChannelMesh {
        mesh: TriMesh::new(vertices, triangles, fine_flags),
        coarse_size: h,
        fine_size: h_f,
        max_depth,
    })
}

/// Splits leaves until edge neighbours differ by at most one level.
fn balance(tree: &mut Quadtree, layout: &Layout) {
    loop {
        let mut split: Vec<Cell> = tree
            .leaves
            .iter()
            .flat_map(|c| {
                tree.neighbours(c)
                    .into_iter()
                    .flatten()
                    .filter(move |n| n.size > 2 * c.size)
            })
            .collect();
        if split.is_empty() {
            return;
        }
        split.sort_unstable();
        split.dedup();
        for cell in split {
            tree.leaves.remove(&cell);
            for child in children(&cell) {
                if !layout.is_hole(&child) {
                    tree.leaves.insert(child);
                }
            }
        }
    }
}

/// Jacobian of the width transform at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jacobian(pub [[f64; 2]; 2]);

impl Jacobian {
    pub const IDENTITY: Jacobian = Jacobian([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let j = self.0;
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }
}

/// Width transform `(x, y) ↦ (x, y + φ(x) ψ(y))` taking the reference channel to width `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelGeometry {
    pub reference_width: f64,
    pub width: f64,
}

impl ChannelGeometry {
    pub fn new(width: f64) -> Self {
        Self {
            reference_width: CHANNEL_REFERENCE_WIDTH,
            width,
        }
    }

    /// Cosine blend: 1 on `|x| ≤ 0.05`, 0 on `|x| ≥ 0.1`, C¹ in between.
    pub fn blend(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= X_MOUTH {
            1.0
        } else if a >= X_BLEND_END {
            0.0
        } else {
            0.5 * (1.0 + (PI * (a - X_MOUTH) / (X_BLEND_END - X_MOUTH)).cos())
        }
    }

    pub fn blend_derivative(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= X_MOUTH || a >= X_BLEND_END {
            0.0
        } else {
            let w = X_BLEND_END - X_MOUTH;
            -0.5 * PI / w * (PI * (a - X_MOUTH) / w).sin() * x.signum()
        }
    }

    fn shift(&self) -> f64 {
        0.5 * (self.width - self.reference_width)
    }

    /// Piecewise linear vertical displacement, zero at `y = 0, ±0.5`.
    pub fn displacement(&self, y: f64) -> f64 {
        let wall = 0.5 * self.reference_width;
        let a = y.abs();
        if a <= wall {
            self.shift() * y / wall
        } else {
            y.signum() * self.shift() * (Y_HALF - a) / (Y_HALF - wall)
        }
    }

    /// Slope of the displacement; at the walls the inner slope is used.
    pub fn displacement_slope(&self, y: f64) -> f64 {
        let wall = 0.5 * self.reference_width;
        if y.abs() <= wall {
            self.shift() / wall
        } else {
            -self.shift() / (Y_HALF - wall)
        }
    }

    pub fn map(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0], p[1] + self.blend(p[0]) * self.displacement(p[1])]
    }

    pub fn jacobian(&self, p: [f64; 2]) -> Jacobian {
        let [x, y] = p;
        Jacobian([
            [1.0, 0.0],
            [
                self.blend_derivative(x) * self.displacement(y),
                1.0 + self.blend(x) * self.displacement_slope(y),
            ],
        ])
    }
}

/// Per-triangle Jacobians of the transform, evaluated at barycenters.
pub fn apply_channel_transform(mesh: &TriMesh, geom: &ChannelGeometry) -> Result<Vec<Jacobian>> {
    (0..mesh.n_triangles())
        .map(|t| {
            let p = mesh.barycenter(t);
            let j = geom.jacobian(p);
            if j.det() > 0.0 {
                Ok(j)
            } else {
                Err(Error::Geometry(format!(
                    "transform for width {} folds the mesh at ({}, {}): det J = {}",
                    geom.width,
                    p[0],
                    p[1],
                    j.det()
                )))
            }
        })
        .collect()
}

/// The mesh with every vertex moved by the transform.
pub fn move_vertices(mesh: &TriMesh, geom: &ChannelGeometry) -> Result<TriMesh> {
    let mut moved = mesh.clone();
    for v in moved.vertices.iter_mut() {
        *v = geom.map(*v);
    }
    if let Some(t) = (0..moved.n_triangles()).find(|&t| !(moved.signed_area(t) > 0.0)) {
        return Err(Error::Geometry(format!(
            "width {} inverts triangle {t}",
            geom.width
        )));
    }
    Ok(moved)
}
