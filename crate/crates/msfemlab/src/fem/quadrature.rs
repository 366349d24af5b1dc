//! Quadrature rules on the reference triangle, in barycentric coordinates.
//! Weights sum to one and are scaled by the physical triangle area at use
//! sites.

use crate::mesh::Point;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub name: &'static str,
    /// Barycentric coordinates of the quadrature points.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub degree: u32,
}

impl QuadratureRule {
    /// One-point centroid rule, exact for degree 1.
    pub fn centroid() -> Self {
        QuadratureRule {
            name: "centroid",
            points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    /// Three-point edge-midpoint rule, exact for degree 2. The default rule
    /// everywhere in this crate.
    pub fn edge_midpoint() -> Self {
        QuadratureRule {
            name: "edge-midpoint",
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Seven-point rule, exact for degree 5. Used where non-polynomial
    /// integrands are compared against analytic values.
    pub fn degree5() -> Self {
        let a = 0.059_715_871_789_770;
        let b = 0.470_142_064_105_115;
        let c = 0.797_426_985_353_087;
        let d = 0.101_286_507_323_456;
        let wa = 0.132_394_152_788_506;
        let wc = 0.125_939_180_544_827;
        QuadratureRule {
            name: "degree-5",
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a, b, b],
                [b, a, b],
                [b, b, a],
                [c, d, d],
                [d, c, d],
                [d, d, c],
            ],
            weights: vec![9.0 / 40.0, wa, wa, wa, wc, wc, wc],
            degree: 5,
        }
    }

    /// Physical position of quadrature point `q` in the triangle (a, b, c).
    pub fn physical_point(&self, q: usize, tri: &[Point; 3]) -> Point {
        let lam = self.points[q];
        Point::new(
            lam[0] * tri[0].x + lam[1] * tri[1].x + lam[2] * tri[2].x,
            lam[0] * tri[0].y + lam[1] * tri[1].y + lam[2] * tri[2].y,
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exact integral of the barycentric monomial l0^a l1^b l2^c over a
    /// triangle of area `area`: 2 area a! b! c! / (a + b + c + 2)!.
    fn bary_monomial_integral(area: f64, e: [u32; 3]) -> f64 {
        let fact = |k: u32| -> f64 { (1..=k).map(|i| i as f64).product() };
        2.0 * area * fact(e[0]) * fact(e[1]) * fact(e[2]) / fact(e[0] + e[1] + e[2] + 2)
    }

    /// Exact integral of x^p y^q over the triangle, by expanding the
    /// cartesian monomial in barycentric coordinates. Independent of the
    /// quadrature path under test.
    fn exact_monomial_integral(tri: &[Point; 3], p: u32, q: u32) -> f64 {
        // x^p = (sum_i l_i x_i)^p expanded by the multinomial theorem; same
        // for y^q; the product is integrated term by term.
        fn multinomials(power: u32) -> Vec<([u32; 3], f64)> {
            let fact = |k: u32| -> f64 { (1..=k).map(|i| i as f64).product() };
            let mut out = Vec::new();
            for i in 0..=power {
                for j in 0..=(power - i) {
                    let k = power - i - j;
                    out.push(([i, j, k], fact(power) / (fact(i) * fact(j) * fact(k))));
                }
            }
            out
        }
        let area = 0.5 * crate::mesh::signed_area2(tri[0], tri[1], tri[2]);
        let xs = [tri[0].x, tri[1].x, tri[2].x];
        let ys = [tri[0].y, tri[1].y, tri[2].y];
        let mut total = 0.0;
        for (ex, cx) in multinomials(p) {
            for (ey, cy) in multinomials(q) {
                let coeff = cx
                    * cy
                    * xs.iter()
                        .zip(ex.iter())
                        .map(|(&x, &e)| x.powi(e as i32))
                        .product::<f64>()
                    * ys.iter()
                        .zip(ey.iter())
                        .map(|(&y, &e)| y.powi(e as i32))
                        .product::<f64>();
                let e = [ex[0] + ey[0], ex[1] + ey[1], ex[2] + ey[2]];
                total += coeff * bary_monomial_integral(area, e);
            }
        }
        total
    }

    fn quadrature_integral(rule: &QuadratureRule, tri: &[Point; 3], p: u32, q: u32) -> f64 {
        let area = 0.5 * crate::mesh::signed_area2(tri[0], tri[1], tri[2]);
        (0..rule.len())
            .map(|i| {
                let pt = rule.physical_point(i, tri);
                rule.weights[i] * area * pt.x.powi(p as i32) * pt.y.powi(q as i32)
            })
            .sum()
    }

    fn check_exactness(rule: &QuadratureRule, tri: &[Point; 3]) {
        for p in 0..=rule.degree {
            for q in 0..=(rule.degree - p) {
                let exact = exact_monomial_integral(tri, p, q);
                let approx = quadrature_integral(rule, tri, p, q);
                let scale = exact.abs().max(1e-30);
                assert!(
                    ((approx - exact) / scale).abs() < 1e-12,
                    "{}: x^{p} y^{q}: {approx} vs {exact}",
                    rule.name
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for rule in [QuadratureRule::centroid(), QuadratureRule::edge_midpoint(), QuadratureRule::degree5()] {
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15, "{}", rule.name);
        }
    }

    #[test]
    fn declared_degrees_are_exact_on_a_fixed_triangle() {
        let tri = [Point::new(0.1, 0.2), Point::new(0.9, 0.3), Point::new(0.4, 0.85)];
        check_exactness(&QuadratureRule::centroid(), &tri);
        check_exactness(&QuadratureRule::edge_midpoint(), &tri);
        check_exactness(&QuadratureRule::degree5(), &tri);
    }

    proptest! {
        #[test]
        fn declared_degrees_are_exact_on_random_triangles(
            ax in 0.0f64..1.0, ay in 0.0f64..1.0,
            bx in 0.0f64..1.0, by in 0.0f64..1.0,
            cx in 0.0f64..1.0, cy in 0.0f64..1.0,
        ) {
            let tri = [Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy)];
            let area2 = crate::mesh::signed_area2(tri[0], tri[1], tri[2]);
            prop_assume!(area2.abs() > 1e-3);
            let tri = if area2 > 0.0 { tri } else { [tri[0], tri[2], tri[1]] };
            check_exactness(&QuadratureRule::edge_midpoint(), &tri);
            check_exactness(&QuadratureRule::degree5(), &tri);
        }
    }
}
