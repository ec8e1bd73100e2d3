//! P1 assembly with lumped mass, normalization and time-step bounds.

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::mesh::{Jacobian, Mesh1D, TriMesh};

/// Semi-discrete wave operator in normalized variables `z = M^{1/2} u`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    /// Lumped mass, one positive entry per node.
    pub mass: Vec<f64>,
    pub stiffness: CsrMatrix,
    /// `A = M^{-1/2} K M^{-1/2}`.
    pub normalized: CsrMatrix,
    /// Diagonal of the selector `P`: nodes of fine-flagged elements.
    pub selector: Vec<bool>,
    pub n_fine: usize,
    pub n_coarse: usize,
}

impl DiscreteOperator {
    pub fn new(mass: Vec<f64>, stiffness: CsrMatrix, selector: Vec<bool>) -> Result<Self> {
        if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Assembly(format!(
                "lumped mass at node {i} is {}",
                mass[i]
            )));
        }
        if stiffness.n_rows() != mass.len() || selector.len() != mass.len() {
            return Err(Error::Assembly("operator dimensions disagree".into()));
        }
        let normalized = normalize(&mass, &stiffness);
        let n_fine = selector.iter().filter(|&&s| s).count();
        Ok(Self {
            n_coarse: mass.len() - n_fine,
            mass,
            stiffness,
            normalized,
            selector,
            n_fine,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Same operator with a different selector.
    pub fn with_selector(&self, selector: Vec<bool>) -> Result<Self> {
        if selector.len() != self.dim() {
            return Err(Error::Assembly(
                "selector length does not match operator".into(),
            ));
        }
        let n_fine = selector.iter().filter(|&&s| s).count();
        Ok(Self {
            selector,
            n_fine,
            n_coarse: self.dim() - n_fine,
            ..self.clone()
        })
    }

    /// `(I - P) A (I - P)`, whose largest eigenvalue bounds the global LTS step.
    pub fn coarse_block(&self) -> CsrMatrix {
        let sel = &self.selector;
        self.normalized.filter(|i| !sel[i], |j| !sel[j])
    }

    /// Nodal values `u = M^{-1/2} z`.
    pub fn to_nodal(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mass)
            .map(|(z, m)| z / m.sqrt())
            .collect()
    }

    /// Normalized variables `z = M^{1/2} u`.
    pub fn to_normalized(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.mass)
            .map(|(u, m)| u * m.sqrt())
            .collect()
    }
}

/// `A_ij = K_ij / sqrt(M_ii M_jj)`.
pub fn normalize(mass: &[f64], stiffness: &CsrMatrix) -> CsrMatrix {
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    stiffness.scale(&inv_sqrt, &inv_sqrt)
}

fn check_speed(c2: f64, element: usize) -> Result<f64> {
    if c2 > 0.0 && c2.is_finite() {
        Ok(c2)
    } else {
        Err(Error::Assembly(format!(
            "squared speed {c2} at element {element} is not positive"
        )))
    }
}

/// 1D assembly with `c²` sampled at element midpoints.
pub fn assemble_1d(mesh: &Mesh1D, speed2: impl Fn(f64) -> Result<f64>) -> Result<DiscreteOperator> {
    let n = mesh.n_vertices();
    let mut mass = vec![0.0; n];
    let mut triplets = Vec::with_capacity(4 * mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let (a, b) = (mesh.vertices[e], mesh.vertices[e + 1]);
        let h = b - a;
        let c2 = check_speed(speed2(0.5 * (a + b))?, e)?;
        let k = c2 / h;
        triplets.extend([(e, e, k), (e, e + 1, -k), (e + 1, e, -k), (e + 1, e + 1, k)]);
        mass[e] += 0.5 * h;
        mass[e + 1] += 0.5 * h;
    }
    let stiffness = CsrMatrix::from_triplets(n, n, triplets);
    let mut selector = vec![false; n];
    for (e, &fine) in mesh.fine_flags.iter().enumerate() {
        if fine {
            selector[e] = true;
            selector[e + 1] = true;
        }
    }
    DiscreteOperator::new(mass, stiffness, selector)
}

/// Barycentric gradients and area of a triangle.
pub fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (b, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(b[1] - c[1]) / det, (c[0] - b[0]) / det];
    }
    (g, 0.5 * det)
}

/// 2D assembly with `c²` at barycenters. With `jacobians`, assembles the
/// pulled-back form `(|J| J^{-T}∇u, J^{-T}∇v)` and mass weight `|J|`.
pub fn assemble_2d(
    mesh: &TriMesh,
    speed2: impl Fn([f64; 2]) -> Result<f64>,
    jacobians: Option<&[Jacobian]>,
) -> Result<DiscreteOperator> {
    if let Some(j) = jacobians {
        if j.len() != mesh.n_triangles() {
            return Err(Error::Assembly(
                "one Jacobian per triangle is required".into(),
            ));
        }
    }
    let n = mesh.n_vertices();
    let mut mass = vec![0.0; n];
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.vertices[i]);
        let (mut g, area) = p1_gradients(p);
        if !(area > 0.0) {
            return Err(Error::Assembly(format!("triangle {t} has area {area}")));
        }
        let c2 = check_speed(speed2(mesh.barycenter(t))?, t)?;
        let mut weight = area * c2;
        let mut mass_weight = area / 3.0;
        if let Some(jacs) = jacobians {
            let j = jacs[t].0;
            let det = jacs[t].det();
            if !(det > 0.0) {
                return Err(Error::Assembly(format!(
                    "Jacobian determinant {det} on triangle {t}"
                )));
            }
            // J^{-T} g
            for gi in g.iter_mut() {
                let (a, b) = (gi[0], gi[1]);
                *gi = [
                    (j[1][1] * a - j[1][0] * b) / det,
                    (-j[0][1] * a + j[0][0] * b) / det,
                ];
            }
            weight *= det;
            mass_weight *= det;
        }
        for a in 0..3 {
            mass[tri[a]] += mass_weight;
            for b in 0..3 {
                let k = weight * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((tri[a], tri[b], k));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, n, triplets);
    let mut selector = vec![false; n];
    for (tri, &fine) in mesh.triangles.iter().zip(&mesh.fine_flags) {
        if fine {
            tri.iter().for_each(|&v| selector[v] = true);
        }
    }
    DiscreteOperator::new(mass, stiffness, selector)
}

pub const POWER_TOLERANCE: f64 = 1e-6;
pub const POWER_MAX_ITERATIONS: usize = 200_000;

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
pub fn max_eigenvalue(a: &CsrMatrix) -> Result<f64> {
    max_eigenvalue_with(a, POWER_TOLERANCE, POWER_MAX_ITERATIONS)
}

/// Power iteration from an alternating-sign start, stopped when the Rayleigh
/// quotient changes by less than `rel_tol` relative.
pub fn max_eigenvalue_with(a: &CsrMatrix, rel_tol: f64, max_iter: usize) -> Result<f64> {
    power_iteration(a.n_rows(), |x, y| a.mul_vec_into(x, y), rel_tol, max_iter)
}

/// Power iteration for a symmetric operator given by its action `apply(x, y)`, `y = A x`.
pub fn power_iteration(
    n: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    // irrational jitter keeps the start away from symmetric invariant subspaces
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + 0.25 * ((i as f64) * 0.618_033_988_749_895).fract())
        })
        .collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut y = vec![0.0; n];
    let mut previous = f64::NAN;
    for _ in 0..max_iter {
        apply(&x, &mut y);
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny == 0.0 {
            return Ok(0.0);
        }
        if (rq - previous).abs() <= rel_tol * rq.abs() {
            return Ok(rq);
        }
        previous = rq;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Leapfrog step bound `safety · 2 / sqrt(λ_max)`.
pub fn cfl_dt(a: &CsrMatrix, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::invalid(format!(
            "safety factor {safety} outside (0, 1]"
        )));
    }
    let lambda = max_eigenvalue(a)?;
    if !(lambda > 0.0) {
        return Err(Error::invalid(
            "operator has no positive eigenvalue; the step is unbounded",
        ));
    }
    Ok(safety * 2.0 / lambda.sqrt())
}

/// Lumped L² projection of the initial data. With nodal quadrature the
/// coefficients are the nodal values; returns `(z0, M^{1/2} v0)`.
pub fn project_initial<P: Copy>(
    nodes: &[P],
    mass: &[f64],
    u0: impl Fn(P) -> f64,
    v0: impl Fn(P) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let z0 = nodes
        .iter()
        .zip(mass)
        .map(|(&p, m)| m.sqrt() * u0(p))
        .collect();
    let w0 = nodes
        .iter()
        .zip(mass)
        .map(|(&p, m)| m.sqrt() * v0(p))
        .collect();
    (z0, w0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_refined_interval, Mesh1D};
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn unit(_: f64) -> Result<f64> {
        Ok(1.0)
    }

    #[test]
    fn interior_rows_1d() {
        let h = 0.25;
        let mesh = Mesh1D::uniform(0.0, 2.0, 8).unwrap();
        let op = assemble_1d(&mesh, unit).unwrap();
        for i in 1..8 {
            assert!((op.stiffness.get(i, i - 1) + 1.0 / h).abs() < 1e-12);
            assert!((op.stiffness.get(i, i) - 2.0 / h).abs() < 1e-12);
            assert!((op.stiffness.get(i, i + 1) + 1.0 / h).abs() < 1e-12);
            assert!((op.mass[i] - h).abs() < 1e-15);
        }
        assert!((op.mass[0] - h / 2.0).abs() < 1e-15);
    }

    #[test]
    fn reference_triangle() {
        let mesh = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![false],
        );
        let op = assemble_2d(&mesh, |_| Ok(1.0), None).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((op.stiffness.get(i, j) - expected[i][j]).abs() < 1e-15);
            }
            assert!((op.mass[i] - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_rows_follow_local_speed() {
        let mesh = Mesh1D::uniform(0.0, 6.0, 96).unwrap();
        let jump = |x: f64| Ok(if x < 3.97 { 1.0 } else { 4.0 });
        let op = assemble_1d(&mesh, jump).unwrap();
        let slow = assemble_1d(&mesh, unit).unwrap();
        let fast = assemble_1d(&mesh, |_| Ok(4.0)).unwrap();
        // element 63 holds 3.97; rows 0..=62 and 65.. are pure
        for i in 0..63 {
            assert_eq!(
                op.stiffness.row(i).collect::<Vec<_>>(),
                slow.stiffness.row(i).collect::<Vec<_>>()
            );
        }
        for i in 65..97 {
            assert_eq!(
                op.stiffness.row(i).collect::<Vec<_>>(),
                fast.stiffness.row(i).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn nonpositive_speed_is_rejected() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 4).unwrap();
        assert!(matches!(
            assemble_1d(&mesh, |_| Ok(0.0)),
            Err(Error::Assembly(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        let k = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, 3.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        );
        assert_eq!(normalize(&[1.0, 1.0], &k), k);
        let a = normalize(&[4.0, 1.0], &k);
        assert_eq!(a.get(0, 1), -0.5);
    }

    #[test]
    fn normalized_spectrum_is_generalized_spectrum() {
        // random SPD K and positive M, n = 12
        let n = 12;
        let mut s = crate::rng::derive_stream(4, 0, 0);
        let b = DMatrix::from_fn(n, n, |_, _| s.uniform(-1.0, 1.0));
        let k = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        let m: Vec<f64> = (0..n).map(|_| s.uniform(0.5, 3.0)).collect();
        let trip = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, k[(i, j)]))
            .collect();
        let a = normalize(&m, &CsrMatrix::from_triplets(n, n, trip));
        let a_dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let mut ev_a: Vec<f64> = SymmetricEigen::new(a_dense)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        // generalized problem via Cholesky of the diagonal M
        let minv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            m.iter().map(|v| 1.0 / v.sqrt()),
        ));
        let mut ev_g: Vec<f64> = SymmetricEigen::new(&minv * &k * &minv)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev_a.sort_by(f64::total_cmp);
        ev_g.sort_by(f64::total_cmp);
        for (x, y) in ev_a.iter().zip(&ev_g) {
            assert!((x - y).abs() < 1e-10 * y.abs().max(1.0));
        }
    }

    #[test]
    fn scalar_cfl() {
        let omega: f64 = 3.0;
        let a = CsrMatrix::from_triplets(1, 1, vec![(0, 0, omega * omega)]);
        assert!((cfl_dt(&a, 1.0).unwrap() - 2.0 / omega).abs() < 1e-12);
    }

    #[test]
    fn uniform_laplacian_lambda_max() {
        for n in [50usize, 200] {
            let h = 1.0 / n as f64;
            let mesh = Mesh1D::uniform(0.0, 1.0, n).unwrap();
            let op = assemble_1d(&mesh, unit).unwrap();
            let dense = DMatrix::from_fn(n + 1, n + 1, |i, j| op.normalized.get(i, j));
            let exact = SymmetricEigen::new(dense).eigenvalues.max();
            let lam = max_eigenvalue(&op.normalized).unwrap();
            assert!((lam - exact).abs() < 1e-4 * exact, "{lam} vs {exact}");
            assert!((exact * h * h - 4.0).abs() < 0.01);
            let dt = cfl_dt(&op.normalized, 1.0).unwrap();
            assert!((dt - h).abs() < 0.01 * h);
        }
    }

    #[test]
    fn doubling_density_halves_dt() {
        let a = assemble_1d(&Mesh1D::uniform(0.0, 6.0, 300).unwrap(), unit).unwrap();
        let b = assemble_1d(&Mesh1D::uniform(0.0, 6.0, 600).unwrap(), unit).unwrap();
        let ratio = cfl_dt(&a.normalized, 0.9).unwrap() / cfl_dt(&b.normalized, 0.9).unwrap();
        assert!((ratio - 2.0).abs() < 0.1);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let mesh = Mesh1D::uniform(0.0, 1.0, 400).unwrap();
        let op = assemble_1d(&mesh, unit).unwrap();
        assert!(matches!(
            max_eigenvalue_with(&op.normalized, 1e-15, 3),
            Err(Error::NoConvergence { iterations: 3 })
        ));
    }

    #[test]
    fn projection_of_constants_and_linears() {
        let mesh = build_refined_interval((0.0, 6.0), 0.25, Some((4.75, 5.0)), 1.0 / 64.0).unwrap();
        let op = assemble_1d(&mesh, unit).unwrap();
        let (z, w) = project_initial(&mesh.vertices, &op.mass, |_| 1.0, |_| 0.0);
        assert!(op.to_nodal(&z).iter().all(|&c| (c - 1.0).abs() < 1e-15));
        assert!(w.iter().all(|&v| v == 0.0));
        let (z, _) = project_initial(&mesh.vertices, &op.mass, |x| 2.0 * x - 1.0, |_| 0.0);
        for (c, x) in op.to_nodal(&z).iter().zip(&mesh.vertices) {
            assert!((c - (2.0 * x - 1.0)).abs() < 1e-13);
        }
    }

    /// Consistent-mass L² projection on a uniform mesh (Gauss quadrature, Thomas solve).
    fn consistent_projection(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let h = 6.0 / n as f64;
        let gauss = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189),
            (-0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.0, 0.568_888_888_888_889),
            (0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.906_179_845_938_664, 0.236_926_885_056_189),
        ];
        let mut rhs = vec![0.0; n + 1];
        for e in 0..n {
            let a = e as f64 * h;
            for &(xi, w) in &gauss {
                let s = 0.5 * (xi + 1.0);
                let val = f(a + s * h) * w * 0.5 * h;
                rhs[e] += val * (1.0 - s);
                rhs[e + 1] += val * s;
            }
        }
        let mut diag: Vec<f64> = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    h / 3.0
                } else {
                    2.0 * h / 3.0
                }
            })
            .collect();
        let off = h / 6.0;
        for i in 1..=n {
            let m = off / diag[i - 1];
            diag[i] -= m * off;
            rhs[i] -= m * rhs[i - 1];
        }
        let mut x = vec![0.0; n + 1];
        x[n] = rhs[n] / diag[n];
        for i in (0..n).rev() {
            x[i] = (rhs[i] - off * x[i + 1]) / diag[i];
        }
        x
    }

    #[test]
    fn lumped_projection_is_second_order_close_to_l2() {
        let u0 = |x: f64| (-(x - 3.0).powi(2) / 0.09).exp();
        let mut errors = Vec::new();
        for n in [96usize, 192, 384, 768] {
            let mesh = Mesh1D::uniform(0.0, 6.0, n).unwrap();
            let op = assemble_1d(&mesh, unit).unwrap();
            let (z, _) = project_initial(&mesh.vertices, &op.mass, u0, |_| 0.0);
            let lumped = op.to_nodal(&z);
            let exact = consistent_projection(n, u0);
            errors.push(
                lumped
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        }
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(
                (1.8..=2.2).contains(&rate),
                "rate {rate}, errors {errors:?}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn stiffness_properties_1d(n in 3usize..60, seed in 0u64..1000) {
            let mut s = crate::rng::derive_stream(seed, 0, 0);
            let mut v = vec![0.0];
            for _ in 0..n { let last = *v.last().unwrap(); v.push(last + s.uniform(0.05, 1.0)); }
            let mesh = Mesh1D { fine_flags: vec![false; n], vertices: v };
            let coeffs: Vec<f64> = (0..n).map(|_| s.uniform(0.5, 4.0)).collect();
            let verts = mesh.vertices.clone();
            let op = assemble_1d(&mesh, |x| {
                let e = verts.partition_point(|&p| p <= x) - 1;
                Ok(coeffs[e])
            }).unwrap();
            prop_assert!(op.stiffness.asymmetry() < 1e-12);
            prop_assert!(op.normalized.asymmetry() < 1e-12);
            let ones = vec![1.0; n + 1];
            prop_assert!(op.stiffness.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12 * 4.0 / 0.05));
            let x: Vec<f64> = (0..=n).map(|_| s.uniform(-1.0, 1.0)).collect();
            let kx = op.stiffness.mul_vec(&x);
            let quad: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!(quad >= -f64::EPSILON * norm2);
        }
    }
}
