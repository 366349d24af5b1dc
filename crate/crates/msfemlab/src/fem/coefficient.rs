//! Diffusion coefficient catalog and source terms.

use crate::mesh::Point;

/// A 2x2 matrix with the handful of operations the solvers need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor2 {
    pub a: [[f64; 2]; 2],
}

impl Tensor2 {
    pub fn new(a: [[f64; 2]; 2]) -> Self {
        Tensor2 { a }
    }

    pub fn identity() -> Self {
        Tensor2::new([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn scalar(c: f64) -> Self {
        Tensor2::new([[c, 0.0], [0.0, c]])
    }

    pub fn zero() -> Self {
        Tensor2::new([[0.0; 2]; 2])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * v[0] + self.a[0][1] * v[1],
            self.a[1][0] * v[0] + self.a[1][1] * v[1],
        ]
    }

    /// u . (A v)
    pub fn bilinear(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let av = self.apply(v);
        u[0] * av[0] + u[1] * av[1]
    }

    pub fn add_scaled(&mut self, other: &Tensor2, s: f64) {
        for r in 0..2 {
            for c in 0..2 {
                self.a[r][c] += s * other.a[r][c];
            }
        }
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        let mut out = *self;
        for r in 0..2 {
            for c in 0..2 {
                out.a[r][c] *= s;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Smallest eigenvalue of the symmetric part (A + A^T)/2.
    pub fn sym_eigen_min(&self) -> f64 {
        let s01 = 0.5 * (self.a[0][1] + self.a[1][0]);
        let tr_half = 0.5 * (self.a[0][0] + self.a[1][1]);
        let dif_half = 0.5 * (self.a[0][0] - self.a[1][1]);
        tr_half - (dif_half * dif_half + s01 * s01).sqrt()
    }

    /// Largest singular value.
    pub fn singular_max(&self) -> f64 {
        // Largest eigenvalue of A^T A, closed form for 2x2.
        let m = self.a;
        let g00 = m[0][0] * m[0][0] + m[1][0] * m[1][0];
        let g11 = m[0][1] * m[0][1] + m[1][1] * m[1][1];
        let g01 = m[0][0] * m[0][1] + m[1][0] * m[1][1];
        let tr_half = 0.5 * (g00 + g11);
        let dif_half = 0.5 * (g00 - g11);
        (tr_half + (dif_half * dif_half + g01 * g01).sqrt()).max(0.0).sqrt()
    }
}

/// The catalog of diffusion fields. Each kind declares its ellipticity
/// bounds (m, M); evaluation returns a 2x2 tensor at a point.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    /// c * Id
    Constant(f64),
    /// A fixed 2x2 matrix.
    ConstantMatrix(Tensor2),
    /// (1 + amplitude * cos^2(pi x1 / eps) * sin^2(pi x2 / eps)) * Id
    Periodic { epsilon: f64, amplitude: f64 },
    /// a(x1) * Id with a = a_minus on [0, eps/2), a_plus on [eps/2, eps),
    /// extended eps-periodically.
    Layered { epsilon: f64, a_minus: f64, a_plus: f64 },
}

impl CoefficientField {
    pub fn at(&self, p: Point) -> Tensor2 {
        match *self {
            CoefficientField::Constant(c) => Tensor2::scalar(c),
            CoefficientField::ConstantMatrix(t) => t,
            CoefficientField::Periodic { epsilon, amplitude } => {
                let c = (std::f64::consts::PI * p.x / epsilon).cos();
                let s = (std::f64::consts::PI * p.y / epsilon).sin();
                Tensor2::scalar(1.0 + amplitude * c * c * s * s)
            }
            CoefficientField::Layered { epsilon, a_minus, a_plus } => {
                let t = p.x / epsilon;
                let frac = t - t.floor();
                Tensor2::scalar(if frac < 0.5 { a_minus } else { a_plus })
            }
        }
    }

    /// Declared ellipticity constants (m, M).
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            CoefficientField::Constant(c) => (c, c),
            CoefficientField::ConstantMatrix(t) => (t.sym_eigen_min(), t.singular_max()),
            CoefficientField::Periodic { amplitude, .. } => (1.0, 1.0 + amplitude),
            CoefficientField::Layered { a_minus, a_plus, .. } => {
                (a_minus.min(a_plus), a_minus.max(a_plus))
            }
        }
    }

    /// Oscillation period, when the field has one.
    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            CoefficientField::Periodic { epsilon, .. }
            | CoefficientField::Layered { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientField::Constant(_) | CoefficientField::ConstantMatrix(_))
    }
}

/// Anything assembly can use as a diffusion tensor: either a pointwise field
/// (ignores the element id) or an element-wise constant field (ignores the
/// point). The latter is exactly what a single-scale P1 code consumes.
pub trait DiffusionTensor {
    fn tensor_at(&self, element: usize, p: Point) -> Tensor2;
}

impl DiffusionTensor for CoefficientField {
    fn tensor_at(&self, _element: usize, p: Point) -> Tensor2 {
        self.at(p)
    }
}

/// Right-hand sides; all slowly varying (no dependence on the oscillation
/// period).
#[derive(Clone, Debug)]
pub enum SourceField {
    Constant(f64),
    /// sin(x1) * cos(x2)
    Trig,
    /// 2 k^2 pi^2 sin(k pi x1) sin(k pi x2); for A = Id the exact solution is
    /// sin(k pi x1) sin(k pi x2).
    Manufactured { k: u32 },
}

impl SourceField {
    pub fn at(&self, p: Point) -> f64 {
        match *self {
            SourceField::Constant(c) => c,
            SourceField::Trig => p.x.sin() * p.y.cos(),
            SourceField::Manufactured { k } => {
                let kp = k as f64 * std::f64::consts::PI;
                2.0 * kp * kp * (kp * p.x).sin() * (kp * p.y).sin()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_field_respects_declared_bounds() {
        let coeff = CoefficientField::Periodic { epsilon: 0.1, amplitude: 100.0 };
        let (m, big_m) = coeff.bounds();
        assert_eq!((m, big_m), (1.0, 101.0));
        for i in 0..40 {
            for j in 0..40 {
                let p = Point::new(i as f64 / 39.0, j as f64 / 39.0);
                let t = coeff.at(p);
                let lam = t.sym_eigen_min();
                assert!(lam >= m - 1e-12);
                assert!(t.singular_max() <= big_m * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn layered_field_alternates_with_half_period() {
        let coeff = CoefficientField::Layered { epsilon: 0.25, a_minus: 1.0, a_plus: 4.0 };
        assert_eq!(coeff.at(Point::new(0.05, 0.3)).a[0][0], 1.0);
        assert_eq!(coeff.at(Point::new(0.2, 0.3)).a[0][0], 4.0);
        assert_eq!(coeff.at(Point::new(0.3, 0.9)).a[0][0], 1.0);
        assert_eq!(coeff.bounds(), (1.0, 4.0));
    }

    #[test]
    fn tensor_singular_and_eigen_helpers() {
        let t = Tensor2::new([[3.0, 0.0], [0.0, 2.0]]);
        assert!((t.sym_eigen_min() - 2.0).abs() < 1e-14);
        assert!((t.singular_max() - 3.0).abs() < 1e-14);

        let r = Tensor2::new([[0.0, -5.0], [5.0, 0.0]]);
        assert!((r.singular_max() - 5.0).abs() < 1e-14);
        assert!(r.sym_eigen_min().abs() < 1e-14);
    }

    #[test]
    fn manufactured_source_matches_formula() {
        let f = SourceField::Manufactured { k: 2 };
        let p = Point::new(0.3, 0.7);
        let kp = 2.0 * std::f64::consts::PI;
        let expect = 2.0 * kp * kp * (kp * 0.3).sin() * (kp * 0.7).sin();
        assert!((f.at(p) - expect).abs() < 1e-14);
    }
}
