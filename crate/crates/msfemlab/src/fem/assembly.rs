//! P1 element matrices and global assembly with homogeneous Dirichlet
//! elimination.

use crate::error::{Error, Result};
use crate::fem::coefficient::{DiffusionTensor, SourceField, Tensor2};
use crate::fem::linalg::{CsrMatrix, SYMMETRY_TOL};
use crate::fem::quadrature::QuadratureRule;
use crate::mesh::{signed_area2, Point, TriMesh};

/// Constant P1 gradients on a triangle, one per vertex, plus the area.
pub fn p1_gradients(tri: &[Point; 3]) -> Result<([[f64; 2]; 3], f64)> {
    let area2 = signed_area2(tri[0], tri[1], tri[2]);
    if area2 <= f64::EPSILON {
        return Err(Error::DegenerateElement(format!(
            "triangle with signed doubled area {area2:.3e}"
        )));
    }
    let g = [
        [(tri[1].y - tri[2].y) / area2, (tri[2].x - tri[1].x) / area2],
        [(tri[2].y - tri[0].y) / area2, (tri[0].x - tri[2].x) / area2],
        [(tri[0].y - tri[1].y) / area2, (tri[1].x - tri[0].x) / area2],
    ];
    Ok((g, 0.5 * area2))
}

/// Gradient of the P1 interpolant with nodal values `w` on the triangle.
pub fn p1_gradient_of(tri: &[Point; 3], w: [f64; 3]) -> Result<[f64; 2]> {
    let (g, _) = p1_gradients(tri)?;
    Ok([
        w[0] * g[0][0] + w[1] * g[1][0] + w[2] * g[2][0],
        w[0] * g[0][1] + w[1] * g[1][1] + w[2] * g[2][1],
    ])
}

/// Quadrature-integrated tensor over a triangle: sum_q w_q |K| A(x_q).
/// Every fine-scale bilinear quantity in this crate is a contraction of
/// constant P1 gradients against this matrix, which is what makes the
/// discrete stiffness identities exact.
pub fn integrated_tensor(
    tri: &[Point; 3],
    tensor: &mut impl FnMut(Point) -> Tensor2,
    quad: &QuadratureRule,
) -> Tensor2 {
    let area = 0.5 * signed_area2(tri[0], tri[1], tri[2]);
    let mut out = Tensor2::zero();
    for q in 0..quad.len() {
        let p = quad.physical_point(q, tri);
        out.add_scaled(&tensor(p), quad.weights[q] * area);
    }
    out
}

/// Element stiffness: entry (j, i) = sum_q w_q |K| grad(phi_j) . A(x_q) grad(phi_i).
pub fn element_stiffness_with(
    tri: &[Point; 3],
    mut tensor: impl FnMut(Point) -> Tensor2,
    quad: &QuadratureRule,
) -> Result<[[f64; 3]; 3]> {
    let (g, _) = p1_gradients(tri)?;
    let it = integrated_tensor(tri, &mut tensor, quad);
    let mut s = [[0.0; 3]; 3];
    for (j, row) in s.iter_mut().enumerate() {
        for (i, entry) in row.iter_mut().enumerate() {
            *entry = it.bilinear(g[j], g[i]);
        }
    }
    Ok(s)
}

/// Element stiffness for a coefficient field from the catalog.
pub fn element_stiffness(
    tri: &[Point; 3],
    coeff: &crate::fem::coefficient::CoefficientField,
    quad: &QuadratureRule,
) -> Result<[[f64; 3]; 3]> {
    element_stiffness_with(tri, |p| coeff.at(p), quad)
}

/// Element load: entry j = sum_q w_q |K| f(x_q) phi_j(x_q).
pub fn element_load_with(
    tri: &[Point; 3],
    mut f: impl FnMut(Point) -> f64,
    quad: &QuadratureRule,
) -> Result<[f64; 3]> {
    let area2 = signed_area2(tri[0], tri[1], tri[2]);
    if area2 <= f64::EPSILON {
        return Err(Error::DegenerateElement(format!(
            "triangle with signed doubled area {area2:.3e}"
        )));
    }
    let area = 0.5 * area2;
    let mut out = [0.0; 3];
    for q in 0..quad.len() {
        let p = quad.physical_point(q, tri);
        let fv = f(p) * quad.weights[q] * area;
        for (j, entry) in out.iter_mut().enumerate() {
            *entry += fv * quad.points[q][j];
        }
    }
    Ok(out)
}

pub fn element_load(tri: &[Point; 3], f: &SourceField, quad: &QuadratureRule) -> Result<[f64; 3]> {
    element_load_with(tri, |p| f.at(p), quad)
}

/// Global system over the interior unknowns, Dirichlet rows and columns
/// eliminated.
#[derive(Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Degree of freedom -> vertex id.
    pub dof_map: Vec<usize>,
    /// Set when the assembled matrix is numerically symmetric.
    pub symmetric: bool,
}

/// Sparsity pattern of the interior-vertex stiffness matrix.
pub fn interior_pattern(mesh: &TriMesh) -> CsrMatrix {
    let ndof = mesh.num_dofs();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); ndof];
    for t in &mesh.triangles {
        for &vi in t {
            if let Some(di) = mesh.dof_of_vertex[vi] {
                for &vj in t {
                    if let Some(dj) = mesh.dof_of_vertex[vj] {
                        rows[di].push(dj);
                    }
                }
            }
        }
    }
    CsrMatrix::from_adjacency(ndof, rows)
}

/// Right-hand side F_j = integral of f phi_j, assembled per element with the
/// given rule. This single routine serves both the plain P1 path and the
/// coarse-scale multiscale path, which keeps their load vectors bitwise
/// identical.
pub fn assemble_rhs(mesh: &TriMesh, f: &SourceField, quad: &QuadratureRule) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; mesh.num_dofs()];
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        let load = element_load(&pts, f, quad)
            .map_err(|e| Error::DegenerateElement(format!("element {t}: {e}")))?;
        for (local, &v) in mesh.triangles[t].iter().enumerate() {
            if let Some(d) = mesh.dof_of_vertex[v] {
                rhs[d] += load[local];
            }
        }
    }
    Ok(rhs)
}

/// Assemble stiffness and load over the interior unknowns.
pub fn assemble<C: DiffusionTensor + ?Sized>(
    mesh: &TriMesh,
    coeff: &C,
    f: &SourceField,
    quad: &QuadratureRule,
) -> Result<SparseSystem> {
    let mut matrix = interior_pattern(mesh);
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        let local = element_stiffness_with(&pts, |p| coeff.tensor_at(t, p), quad)
            .map_err(|e| Error::DegenerateElement(format!("element {t}: {e}")))?;
        let verts = mesh.triangles[t];
        for (lj, &vj) in verts.iter().enumerate() {
            if let Some(dj) = mesh.dof_of_vertex[vj] {
                for (li, &vi) in verts.iter().enumerate() {
                    if let Some(di) = mesh.dof_of_vertex[vi] {
                        matrix.add(dj, di, local[lj][li]);
                    }
                }
            }
        }
    }
    let rhs = assemble_rhs(mesh, f, quad)?;
    let symmetric = matrix.is_symmetric(SYMMETRY_TOL);
    Ok(SparseSystem {
        matrix,
        rhs,
        dof_map: mesh.interior_vertex_ids.clone(),
        symmetric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::coefficient::CoefficientField;
    use crate::mesh::build_structured_coarse;

    fn unit_right_triangle() -> [Point; 3] {
        [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]
    }

    #[test]
    fn stiffness_on_unit_right_triangle_matches_hand_integration() {
        let quad = QuadratureRule::edge_midpoint();
        let s = element_stiffness(&unit_right_triangle(), &CoefficientField::Constant(1.0), &quad)
            .unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for j in 0..3 {
            for i in 0..3 {
                assert!(
                    (s[j][i] - expect[j][i]).abs() < 1e-14,
                    "entry ({j},{i}): {} vs {}",
                    s[j][i],
                    expect[j][i]
                );
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_scale_linearly() {
        let quad = QuadratureRule::edge_midpoint();
        let tri = [Point::new(0.2, 0.1), Point::new(0.9, 0.4), Point::new(0.3, 0.8)];
        let s1 = element_stiffness(&tri, &CoefficientField::Constant(1.0), &quad).unwrap();
        for row in &s1 {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
        let c = 3.75;
        let sc = element_stiffness(&tri, &CoefficientField::Constant(c), &quad).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                assert!((sc[j][i] - c * s1[j][i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stiffness_rejects_degenerate_triangles() {
        let quad = QuadratureRule::edge_midpoint();
        let tri = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(0.5, 0.5)];
        assert!(matches!(
            element_stiffness(&tri, &CoefficientField::Constant(1.0), &quad),
            Err(Error::DegenerateElement(_))
        ));
    }

    #[test]
    fn load_of_constant_one_is_a_third_of_the_area() {
        let quad = QuadratureRule::edge_midpoint();
        let tri = [Point::new(0.1, 0.1), Point::new(0.7, 0.2), Point::new(0.3, 0.9)];
        let area = 0.5 * signed_area2(tri[0], tri[1], tri[2]);
        let l1 = element_load(&tri, &SourceField::Constant(1.0), &quad).unwrap();
        for v in l1 {
            assert!((v - area / 3.0).abs() < 1e-14);
        }
        let l0 = element_load(&tri, &SourceField::Constant(0.0), &quad).unwrap();
        assert_eq!(l0, [0.0; 3]);
        let l2 = element_load(&tri, &SourceField::Constant(2.0), &quad).unwrap();
        for (a, b) in l2.iter().zip(l1.iter()) {
            assert!((a - 2.0 * b).abs() < 1e-14);
        }
    }

    #[test]
    fn n2_identity_coefficient_gives_the_five_point_stencil_diagonal() {
        let coarse = build_structured_coarse(2).unwrap();
        let quad = QuadratureRule::edge_midpoint();
        let sys = assemble(
            &coarse.tri,
            &CoefficientField::Constant(1.0),
            &SourceField::Constant(1.0),
            &quad,
        )
        .unwrap();
        assert_eq!(sys.matrix.n, 1);
        assert!((sys.matrix.get(0, 0) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn assembled_matrix_is_symmetric_and_rhs_respects_zero_source() {
        let coarse = build_structured_coarse(4).unwrap();
        let quad = QuadratureRule::edge_midpoint();
        let sys = assemble(
            &coarse.tri,
            &CoefficientField::Periodic { epsilon: 0.3, amplitude: 5.0 },
            &SourceField::Constant(0.0),
            &quad,
        )
        .unwrap();
        assert!(sys.symmetric);
        assert!(sys.matrix.max_asymmetry() <= 1e-12 * sys.matrix.max_abs());
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        for d in 0..sys.matrix.n {
            let lo = sys.matrix.row_ptr[d];
            let hi = sys.matrix.row_ptr[d + 1];
            assert!(sys.matrix.cols[lo..hi].windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn assembly_is_linear_in_the_coefficient() {
        let coarse = build_structured_coarse(3).unwrap();
        let quad = QuadratureRule::edge_midpoint();
        let a1 = Tensor2::new([[2.0, 0.3], [0.3, 1.5]]);
        let a2 = Tensor2::new([[0.5, -0.1], [-0.1, 2.5]]);
        let mut sum = a1;
        sum.add_scaled(&a2, 1.0);
        let f = SourceField::Constant(0.0);
        let s1 = assemble(&coarse.tri, &CoefficientField::ConstantMatrix(a1), &f, &quad).unwrap();
        let s2 = assemble(&coarse.tri, &CoefficientField::ConstantMatrix(a2), &f, &quad).unwrap();
        let s12 = assemble(&coarse.tri, &CoefficientField::ConstantMatrix(sum), &f, &quad).unwrap();
        for k in 0..s12.matrix.vals.len() {
            assert!((s12.matrix.vals[k] - s1.matrix.vals[k] - s2.matrix.vals[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_solution_is_orthogonal_to_all_test_functions() {
        // Galerkin smoke test: the residual of the solved system against
        // every P1 test function stays at solver precision.
        let coarse = build_structured_coarse(8).unwrap();
        let quad = QuadratureRule::edge_midpoint();
        let sys = assemble(
            &coarse.tri,
            &CoefficientField::Constant(1.0),
            &SourceField::Manufactured { k: 1 },
            &quad,
        )
        .unwrap();
        let u = crate::fem::linalg::solve_csr(
            &sys.matrix,
            &sys.rhs,
            &crate::fem::linalg::SolveMethod::DirectCholesky,
        )
        .unwrap();
        let mut au = vec![0.0; sys.matrix.n];
        sys.matrix.matvec(&u, &mut au);
        let worst = au
            .iter()
            .zip(sys.rhs.iter())
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert!(worst <= 1e-10, "residual {worst}");
    }

    #[test]
    fn coercivity_via_inverse_power_iteration() {
        let coarse = build_structured_coarse(6).unwrap();
        let quad = QuadratureRule::edge_midpoint();
        let sys = assemble(
            &coarse.tri,
            &CoefficientField::Layered { epsilon: 0.25, a_minus: 1.0, a_plus: 4.0 },
            &SourceField::Constant(0.0),
            &quad,
        )
        .unwrap();
        let chol = crate::fem::linalg::BandCholesky::factor(&sys.matrix).unwrap();
        let n = sys.matrix.n;
        let mut v = vec![1.0f64; n];
        let mut lam = 0.0;
        for _ in 0..50 {
            let w = chol.solve(&v);
            let norm = w.iter().map(|&x| x * x).sum::<f64>().sqrt();
            for i in 0..n {
                v[i] = w[i] / norm;
            }
            lam = 1.0 / norm;
        }
        assert!(lam > 0.0, "smallest eigenvalue estimate {lam}");
    }
}
