//! Piecewise linear functions over a triangulation: point evaluation,
//! per-element gradients, and exact P1 norms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::p1_gradient_of;
use crate::mesh::{same_space, Point, TriMesh};

/// A P1 function: one value per mesh vertex.
#[derive(Clone, Debug)]
pub struct FeFunction {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(mesh: Arc<TriMesh>) -> Self {
        let values = vec![0.0; mesh.num_vertices()];
        FeFunction { mesh, values }
    }

    /// Lift a vector of interior unknowns to a mesh function; constrained
    /// vertices are exactly zero.
    pub fn from_interior(mesh: Arc<TriMesh>, dofs: &[f64]) -> Result<Self> {
        if dofs.len() != mesh.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "expected {} interior values, got {}",
                mesh.num_dofs(),
                dofs.len()
            )));
        }
        let mut values = vec![0.0; mesh.num_vertices()];
        for (d, &v) in mesh.interior_vertex_ids.iter().zip(dofs.iter()) {
            values[*d] = v;
        }
        Ok(FeFunction { mesh, values })
    }

    /// Nodal interpolant of a closure.
    pub fn interpolate(mesh: Arc<TriMesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.points.iter().map(|&p| f(p)).collect();
        FeFunction { mesh, values }
    }

    /// Interior unknowns in dof order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh
            .interior_vertex_ids
            .iter()
            .map(|&v| self.values[v])
            .collect()
    }

    /// Evaluate at a point by barycentric interpolation.
    pub fn eval(&self, p: Point) -> Result<f64> {
        let (t, lam) = self.mesh.locate(p)?;
        let [a, b, c] = self.mesh.triangles[t];
        Ok(lam[0] * self.values[a] + lam[1] * self.values[b] + lam[2] * self.values[c])
    }

    /// Constant gradient inside one element.
    pub fn gradient_in(&self, element: usize) -> Result<[f64; 2]> {
        let pts = self.mesh.triangle_points(element);
        let [a, b, c] = self.mesh.triangles[element];
        p1_gradient_of(&pts, [self.values[a], self.values[b], self.values[c]])
    }
}

fn check_same_space(u: &FeFunction, v: &FeFunction) -> Result<()> {
    if Arc::ptr_eq(&u.mesh, &v.mesh) || same_space(&u.mesh, &v.mesh) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "functions live on different meshes".into(),
        ))
    }
}

/// H1 seminorm of (u - v); exact because P1 gradients are constant per
/// triangle.
pub fn h1_seminorm_diff(u: &FeFunction, v: &FeFunction) -> Result<f64> {
    check_same_space(u, v)?;
    let mesh = &u.mesh;
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        let [a, b, c] = mesh.triangles[t];
        let w = [
            u.values[a] - v.values[a],
            u.values[b] - v.values[b],
            u.values[c] - v.values[c],
        ];
        let g = p1_gradient_of(&pts, w)?;
        total += mesh.triangle_area(t) * (g[0] * g[0] + g[1] * g[1]);
    }
    Ok(total.sqrt())
}

/// L2 norm of (u - v) via the exact P1 mass matrix:
/// integral of w^2 over T = |T|/6 (sum w_i^2 + sum_{i<j} w_i w_j).
pub fn l2_norm_diff(u: &FeFunction, v: &FeFunction) -> Result<f64> {
    check_same_space(u, v)?;
    let mesh = &u.mesh;
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.triangles[t];
        let w = [
            u.values[a] - v.values[a],
            u.values[b] - v.values[b],
            u.values[c] - v.values[c],
        ];
        let squares = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        let cross = w[0] * w[1] + w[0] * w[2] + w[1] * w[2];
        total += mesh.triangle_area(t) / 6.0 * (squares + cross);
    }
    Ok(total.sqrt())
}

/// Full H1 norm of (u - v).
pub fn h1_norm_diff(u: &FeFunction, v: &FeFunction) -> Result<f64> {
    let semi = h1_seminorm_diff(u, v)?;
    let l2 = l2_norm_diff(u, v)?;
    Ok((semi * semi + l2 * l2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_global_fine, build_structured_coarse};

    #[test]
    fn norms_of_identical_functions_vanish() {
        let mesh = build_structured_coarse(4).unwrap();
        let u = FeFunction::interpolate(mesh.tri.clone(), |p| p.x * p.y + 1.0);
        assert_eq!(h1_seminorm_diff(&u, &u).unwrap(), 0.0);
        assert_eq!(l2_norm_diff(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn seminorm_of_a_linear_interpolant_is_exact() {
        let mesh = build_structured_coarse(3).unwrap();
        let u = FeFunction::interpolate(mesh.tri.clone(), |p| p.x);
        let zero = FeFunction::zeros(mesh.tri.clone());
        assert!((h1_seminorm_diff(&u, &zero).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn seminorm_of_the_sine_interpolant_converges_to_the_analytic_value() {
        // integral of |grad sin(pi x) sin(pi y)|^2 over the square is pi^2/2
        let coarse = build_structured_coarse(2).unwrap();
        let fine = build_global_fine(&coarse, 5).unwrap(); // h = 1/64
        let pi = std::f64::consts::PI;
        let u = FeFunction::interpolate(fine.tri.clone(), |p| (pi * p.x).sin() * (pi * p.y).sin());
        let zero = FeFunction::zeros(fine.tri.clone());
        let semi = h1_seminorm_diff(&u, &zero).unwrap();
        let expect = pi / 2.0f64.sqrt();
        assert!((semi - expect).abs() / expect < 0.01, "{semi} vs {expect}");
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let m1 = build_structured_coarse(3).unwrap();
        let m2 = build_structured_coarse(4).unwrap();
        let u = FeFunction::zeros(m1.tri.clone());
        let v = FeFunction::zeros(m2.tri.clone());
        assert!(matches!(h1_seminorm_diff(&u, &v), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn evaluation_reproduces_vertex_values_and_centroid_means() {
        let mesh = build_structured_coarse(4).unwrap();
        let u = FeFunction::interpolate(mesh.tri.clone(), |p| 3.0 * p.x - p.y + 0.25);
        let v = mesh.tri.interior_vertex_ids[2];
        let p = mesh.tri.points[v];
        assert!((u.eval(p).unwrap() - u.values[v]).abs() < 1e-14);

        let t = 9;
        let [a, b, c] = mesh.tri.triangles[t];
        let pts = mesh.tri.triangle_points(t);
        let centroid = Point::new(
            (pts[0].x + pts[1].x + pts[2].x) / 3.0,
            (pts[0].y + pts[1].y + pts[2].y) / 3.0,
        );
        let mean = (u.values[a] + u.values[b] + u.values[c]) / 3.0;
        assert!((u.eval(centroid).unwrap() - mean).abs() < 1e-14);
    }

    #[test]
    fn gradient_of_a_linear_field_is_constant() {
        let mesh = build_structured_coarse(5).unwrap();
        let u = FeFunction::interpolate(mesh.tri.clone(), |p| 2.0 * p.x + 3.0 * p.y);
        for t in 0..mesh.tri.num_triangles() {
            let g = u.gradient_in(t).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_evaluation_propagates() {
        let mesh = build_structured_coarse(2).unwrap();
        let u = FeFunction::zeros(mesh.tri.clone());
        assert!(matches!(u.eval(Point::new(2.0, 0.0)), Err(Error::OutOfDomain(_, _))));
    }
}
