//! Locally refined meshes of an interval and their nested hierarchies.

use log::warn;

use crate::error::{Error, Result};

/// A partition of `[a, b]` into intervals.
///
/// `fine_flags[e]` marks element `e` as part of the refined region or one of
/// the two elements touching it.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh1D {
    pub vertices: Vec<f64>,
    pub fine_flags: Vec<bool>,
}

impl Mesh1D {
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(Error::invalid(format!(
                "cannot split [{a}, {b}] into {n} elements"
            )));
        }
        let step = (b - a) / n as f64;
        let mut vertices: Vec<f64> = (0..n).map(|i| a + i as f64 * step).collect();
        vertices.push(b);
        Ok(Self {
            vertices,
            fine_flags: vec![false; n],
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.vertices[0], *self.vertices.last().unwrap())
    }

    pub fn element_size(&self, e: usize) -> f64 {
        self.vertices[e + 1] - self.vertices[e]
    }

    pub fn element_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.vertices.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_element_size(&self) -> f64 {
        self.element_sizes().fold(f64::INFINITY, f64::min)
    }

    pub fn max_element_size(&self) -> f64 {
        self.element_sizes().fold(0.0, f64::max)
    }

    /// Index of the element containing `x`; the right end point belongs to the last element.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let (a, b) = self.domain();
        if !(a..=b).contains(&x) {
            return None;
        }
        let i = self.vertices.partition_point(|&v| v <= x);
        Some(i.saturating_sub(1).min(self.n_elements() - 1))
    }

    /// Strictly increasing vertices and one flag per element.
    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 2 {
            return Err(Error::Geometry("mesh needs at least one element".into()));
        }
        if self.fine_flags.len() != self.n_elements() {
            return Err(Error::Geometry(
                "fine flag count does not match elements".into(),
            ));
        }
        if let Some(w) = self.vertices.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Geometry(format!(
                "vertices not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    /// Total length of the flagged elements.
    pub fn fine_length(&self) -> f64 {
        self.element_sizes()
            .zip(&self.fine_flags)
            .filter(|(_, &f)| f)
            .map(|(h, _)| h)
            .sum()
    }

    /// True if every vertex of `self` is also a vertex of `finer` (exact comparison).
    pub fn is_nested_in(&self, finer: &Mesh1D) -> bool {
        let mut j = 0;
        for &v in &self.vertices {
            while j < finer.vertices.len() && finer.vertices[j] < v {
                j += 1;
            }
            if j == finer.vertices.len() || finer.vertices[j] != v {
                return false;
            }
        }
        true
    }
}

/// Element counts of the three pieces `[a, c]`, `[c, d]`, `[d, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct PieceCounts {
    left: usize,
    fine: usize,
    right: usize,
}

impl PieceCounts {
    fn doubled(self) -> Self {
        Self {
            left: 2 * self.left,
            fine: 2 * self.fine,
            right: 2 * self.right,
        }
    }
}

fn coarse_count(len: f64, h: f64) -> usize {
    if len <= 0.0 {
        0
    } else {
        ((len / h).round() as usize).max(1)
    }
}

fn check_region(domain: (f64, f64), fine: (f64, f64)) -> Result<()> {
    let (a, b) = domain;
    let (c, d) = fine;
    if !(b > a) {
        return Err(Error::invalid(format!("empty domain [{a}, {b}]")));
    }
    if !(d > c) || c < a || d > b {
        return Err(Error::invalid(format!(
            "fine region [{c}, {d}] is not a subinterval of [{a}, {b}]"
        )));
    }
    Ok(())
}

fn push_uniform(vertices: &mut Vec<f64>, start: f64, end: f64, n: usize) {
    if n == 0 {
        return;
    }
    let step = (end - start) / n as f64;
    for i in 1..n {
        vertices.push(start + i as f64 * step);
    }
    vertices.push(end);
}

fn mesh_from_counts(domain: (f64, f64), fine: (f64, f64), counts: PieceCounts) -> Mesh1D {
    let (a, b) = domain;
    let (c, d) = fine;
    let mut vertices = vec![a];
    push_uniform(&mut vertices, a, c, counts.left);
    push_uniform(&mut vertices, c, d, counts.fine);
    push_uniform(&mut vertices, d, b, counts.right);

    let n = vertices.len() - 1;
    let mut fine_flags = vec![false; n];
    let first = counts.left;
    let last = counts.left + counts.fine; // one past the refined block
    let lo = first.saturating_sub(1);
    let hi = (last + 1).min(n);
    fine_flags[lo..hi].iter_mut().for_each(|f| *f = true);
    Mesh1D {
        vertices,
        fine_flags,
    }
}

/// Mesh of `domain` with uniform size `h_f` on `fine` and size close to `h`
/// elsewhere. Without a fine region the mesh is uniform with size close to `h`.
pub fn build_refined_interval(
    domain: (f64, f64),
    h: f64,
    fine: Option<(f64, f64)>,
    h_f: f64,
) -> Result<Mesh1D> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!(
            "mesh size must be positive, got {h}"
        )));
    }
    let Some(fine) = fine else {
        let (a, b) = domain;
        return Mesh1D::uniform(a, b, coarse_count(b - a, h));
    };
    check_region(domain, fine)?;
    if !(h_f > 0.0) || h_f > h * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "fine size {h_f} must lie in (0, {h}]"
        )));
    }
    let counts = level_zero_counts(domain, fine, h, h_f);
    Ok(mesh_from_counts(domain, fine, counts))
}

fn level_zero_counts(domain: (f64, f64), fine: (f64, f64), h: f64, h_f: f64) -> PieceCounts {
    PieceCounts {
        left: coarse_count(fine.0 - domain.0, h),
        fine: coarse_count(fine.1 - fine.0, h_f),
        right: coarse_count(domain.1 - fine.1, h),
    }
}

/// Ratio `⌈h / h_f⌉`, robust to rounding when `h / h_f` is an integer.
pub fn refinement_ratio(h: f64, h_f: f64) -> usize {
    ((h / h_f) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    pub levels: Vec<Mesh1D>,
    pub h0: f64,
    pub fine_size: f64,
    /// `H_ℓ = H_0 / 2^ℓ`.
    pub coarse_sizes: Vec<f64>,
    /// `p_ℓ = ⌈H_ℓ / h_f⌉`.
    pub ratios: Vec<usize>,
}

impl MeshHierarchy {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Nested hierarchy with coarse size halved per level and the fine size kept
/// at `h_f` until the coarse size drops below it.
///
/// Element counts double from level to level, so every vertex of level ℓ is
/// reproduced bit for bit on level ℓ + 1.
pub fn build_hierarchy(
    domain: (f64, f64),
    h0: f64,
    fine: (f64, f64),
    h_f: f64,
    max_level: usize,
) -> Result<MeshHierarchy> {
    let base = build_refined_interval(domain, h0, Some(fine), h_f)?;
    let mut counts = level_zero_counts(domain, fine, h0, h_f);
    let mut levels = vec![base];
    let mut coarse_sizes = vec![h0];
    let mut ratios = vec![refinement_ratio(h0, h_f)];
    let mut warned = false;
    for level in 1..=max_level {
        let h = h0 / (1u64 << level) as f64;
        let fine_uniform = h < h_f * (1.0 - 1e-12);
        let next = if fine_uniform {
            if !warned {
                warn!(
                    "coarse size {h} is below the fine size {h_f} at level {level}; \
                     refining the fine region uniformly from here on"
                );
                warned = true;
            }
            counts.doubled()
        } else {
            PieceCounts {
                fine: counts.fine,
                ..counts.doubled()
            }
        };
        counts = next;
        levels.push(mesh_from_counts(domain, fine, counts));
        coarse_sizes.push(h);
        ratios.push(refinement_ratio(h, h_f));
    }
    Ok(MeshHierarchy {
        levels,
        h0,
        fine_size: h_f,
        coarse_sizes,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_without_fine_region() {
        let m = build_refined_interval((0.0, 6.0), 0.5, None, 0.5).unwrap();
        assert_eq!(m.n_elements(), 12);
        assert!(m.fine_flags.iter().all(|f| !f));
        assert!(m.element_sizes().all(|h| (h - 0.5).abs() < 1e-15));
    }

    #[test]
    fn refined_level_zero_of_the_sketch() {
        let m = build_refined_interval((0.0, 6.0), 0.5, Some((4.5, 5.0)), 1.0 / 32.0).unwrap();
        m.validate().unwrap();
        // 9 coarse elements left, 16 fine, 2 coarse right
        assert_eq!(m.n_elements(), 9 + 16 + 2);
        let fine: Vec<f64> = m.element_sizes().skip(9).take(16).collect();
        assert!(fine.iter().all(|h| (h - 1.0 / 32.0).abs() < 1e-14));
        // flagged: fine block plus one neighbour on each side
        assert_eq!(m.fine_flags.iter().filter(|&&f| f).count(), 18);
        assert!(m.fine_flags[8] && m.fine_flags[25] && !m.fine_flags[7] && !m.fine_flags[26]);
    }

    #[test]
    fn jump_setup_has_32_fine_elements() {
        let h0 = 1.0 / 16.0;
        let m = build_refined_interval((0.0, 6.0), h0, Some((4.0 - h0, 4.0)), 1.0 / 512.0).unwrap();
        let n_fine = m
            .element_sizes()
            .filter(|h| (h - 1.0 / 512.0).abs() < 1e-14)
            .count();
        assert_eq!(n_fine, 32);
        assert_eq!(refinement_ratio(h0, 1.0 / 512.0), 32);
    }

    #[test]
    fn fine_region_outside_domain_is_rejected() {
        assert!(build_refined_interval((0.0, 6.0), 0.5, Some((5.5, 6.5)), 0.1).is_err());
        assert!(build_refined_interval((0.0, 6.0), 0.5, Some((-1.0, 7.0)), 0.1).is_err());
    }

    #[test]
    fn sketch_hierarchy_sizes() {
        let h = build_hierarchy((0.0, 6.0), 0.5, (4.5, 5.0), 1.0 / 32.0, 3).unwrap();
        for (level, mesh) in h.levels.iter().enumerate() {
            let hc = 0.5 / (1 << level) as f64;
            assert!((mesh.max_element_size() - hc).abs() < 1e-14);
            assert!((mesh.min_element_size() - 1.0 / 32.0).abs() < 1e-14);
        }
        assert_eq!(h.ratios, vec![16, 8, 4, 2]);
    }

    #[test]
    fn level_zero_hierarchy_is_the_single_mesh() {
        let h = build_hierarchy((0.0, 6.0), 0.5, (4.5, 5.0), 1.0 / 32.0, 0).unwrap();
        let m = build_refined_interval((0.0, 6.0), 0.5, Some((4.5, 5.0)), 1.0 / 32.0).unwrap();
        assert_eq!(h.levels, vec![m]);
    }

    #[test]
    fn smooth_hierarchy_is_nested() {
        let h0 = 1.0 / 16.0;
        let h = build_hierarchy((0.0, 6.0), h0, (5.0 - h0, 5.0), 1.0 / 256.0, 6).unwrap();
        for w in h.levels.windows(2) {
            assert!(w[0].is_nested_in(&w[1]));
        }
        // levels 4.. are uniform once H < h_f
        let last = h.levels.last().unwrap();
        assert!((last.max_element_size() - last.min_element_size()).abs() < 1e-15);
        assert_eq!(h.ratios, vec![16, 8, 4, 2, 1, 1, 1]);
    }

    proptest! {
        #[test]
        fn partition_and_size_bounds(
            n_coarse in 4usize..40,
            fine_start in 0.05f64..0.8,
            fine_frac in 0.02f64..0.15,
            ratio_exp in 0u32..5,
            levels in 0usize..4,
        ) {
            let h0 = 1.0 / n_coarse as f64;
            let h_f = h0 / (1u32 << ratio_exp) as f64;
            let c = fine_start;
            let d = (c + fine_frac).min(1.0);
            let hier = build_hierarchy((0.0, 1.0), h0, (c, d), h_f, levels).unwrap();
            for (l, m) in hier.levels.iter().enumerate() {
                m.validate().unwrap();
                let total: f64 = m.element_sizes().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                let hl = hier.coarse_sizes[l];
                for (e, size) in m.element_sizes().enumerate() {
                    let x = 0.5 * (m.vertices[e] + m.vertices[e + 1]);
                    if x < c || x > d {
                        // a piece shorter than H_0 / 2 collapses to one short element
                        let piece = if x < c { c } else { 1.0 - d };
                        if piece >= h0 / 2.0 {
                            prop_assert!(size >= hl / 2.0 - 1e-12 && size <= 2.0 * hl + 1e-12);
                        }
                    }
                }
                if l + 1 < hier.levels.len() {
                    prop_assert!(m.is_nested_in(&hier.levels[l + 1]));
                }
            }
        }
    }
}
