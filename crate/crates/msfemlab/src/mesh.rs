//! Triangulations of the unit square: the coarse mesh, per-element nested
//! refinements, and the global fine mesh obtained as their conforming union.
//!
//! All meshes are structured: the square is cut into `n x n` cells and every
//! cell is split along the same bottom-left to top-right diagonal. Nested
//! refinements are uniform ("red"): each level quadruples the triangle count.
//! Because every vertex of every mesh sits on an integer lattice, vertex
//! coordinates are dyadic rationals and the meshes of adjacent elements agree
//! bitwise on shared edges.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance for geometric predicates (coordinates here are dyadic rationals,
/// so this is slack).
pub const GEOM_TOL: f64 = 1e-12;

/// Barycentric containment tolerance used by point location.
pub const LOCATE_TOL: f64 = 1e-10;

/// A point of the closed unit square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Twice the signed area of the triangle (a, b, c); positive when
/// counterclockwise.
pub fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Barycentric coordinates of `p` with respect to the triangle (a, b, c).
/// The first coordinate is computed as `1 - l1 - l2` so the sum is exactly 1.
pub fn barycentric(a: Point, b: Point, c: Point, p: Point) -> [f64; 3] {
    let area2 = signed_area2(a, b, c);
    let l1 = signed_area2(a, p, c) / area2;
    let l2 = signed_area2(a, b, p) / area2;
    [1.0 - l1 - l2, l1, l2]
}

/// A conforming triangulation with homogeneous Dirichlet constraints on some
/// vertex set (the boundary of the square for global meshes, the boundary of
/// the parent element for local fine meshes).
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub points: Vec<Point>,
    /// Vertex triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// `true` where the vertex carries the Dirichlet constraint.
    pub constrained: Vec<bool>,
    /// Unconstrained vertex ids, ascending. These enumerate the degrees of
    /// freedom.
    pub interior_vertex_ids: Vec<usize>,
    /// Vertex id -> degree-of-freedom index (None on constrained vertices).
    pub dof_of_vertex: Vec<Option<usize>>,
    /// `Some(n)` when this is the structured n x n triangulation of the unit
    /// square; enables O(1) point location.
    pub structured_div: Option<usize>,
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.interior_vertex_ids.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * signed_area2(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    fn rebuild_dof_maps(points: usize, constrained: &[bool]) -> (Vec<usize>, Vec<Option<usize>>) {
        let mut interior = Vec::new();
        let mut dof = vec![None; points];
        for v in 0..points {
            if !constrained[v] {
                dof[v] = Some(interior.len());
                interior.push(v);
            }
        }
        (interior, dof)
    }

    /// Locate the triangle containing `p`. Returns the lowest triangle id
    /// whose barycentric coordinates are all `>= -LOCATE_TOL`, so points on a
    /// shared edge resolve to the lowest incident triangle.
    pub fn locate(&self, p: Point) -> Result<(usize, [f64; 3])> {
        if !(p.x.is_finite() && p.y.is_finite())
            || p.x < -GEOM_TOL
            || p.x > 1.0 + GEOM_TOL
            || p.y < -GEOM_TOL
            || p.y > 1.0 + GEOM_TOL
        {
            return Err(Error::OutOfDomain(p.x, p.y));
        }
        if let Some(n) = self.structured_div {
            let nf = n as f64;
            let clamp_cell = |c: f64| -> i64 {
                let c = c.floor() as i64;
                c.clamp(0, n as i64 - 1)
            };
            let ci = clamp_cell(p.x * nf);
            let cj = clamp_cell(p.y * nf);
            let mut candidates = Vec::with_capacity(18);
            for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    let (i, j) = (ci + di, cj + dj);
                    if i >= 0 && i < n as i64 && j >= 0 && j < n as i64 {
                        let s = (j as usize) * n + i as usize;
                        candidates.push(2 * s);
                        candidates.push(2 * s + 1);
                    }
                }
            }
            candidates.sort_unstable();
            for t in candidates {
                let lam = self.bary_in(t, p);
                if lam.iter().all(|&l| l >= -LOCATE_TOL) {
                    return Ok((t, lam));
                }
            }
            // Tolerance edge cases fall through to the exhaustive scan.
        }
        for t in 0..self.num_triangles() {
            let lam = self.bary_in(t, p);
            if lam.iter().all(|&l| l >= -LOCATE_TOL) {
                return Ok((t, lam));
            }
        }
        Err(Error::OutOfDomain(p.x, p.y))
    }

    fn bary_in(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        barycentric(a, b, c, p)
    }
}

/// Point location on any triangulation of the unit square.
pub fn locate_point(mesh: &TriMesh, p: Point) -> Result<(usize, [f64; 3])> {
    mesh.locate(p)
}

/// The structured n x n triangulation of the unit square. Vertex (i, j) gets
/// id `j*(n+1)+i`; cell (i, j) contributes triangles `2s` (lower) and `2s+1`
/// (upper) with `s = j*n+i`.
fn structured_unit_square(n: usize) -> TriMesh {
    let nf = n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    let mut constrained = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            points.push(Point::new(i as f64 / nf, j as f64 / nf));
            constrained.push(i == 0 || i == n || j == 0 || j == n);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let (interior_vertex_ids, dof_of_vertex) = TriMesh::rebuild_dof_maps(points.len(), &constrained);
    TriMesh {
        points,
        triangles,
        constrained,
        interior_vertex_ids,
        dof_of_vertex,
        structured_div: Some(n),
    }
}

/// Coarse triangulation of the unit square with n divisions per side.
#[derive(Clone, Debug)]
pub struct CoarseMesh {
    pub n: usize,
    pub tri: Arc<TriMesh>,
}

impl CoarseMesh {
    pub fn num_elements(&self) -> usize {
        self.tri.num_triangles()
    }

    /// Mesh diameter: the diagonal of a cell.
    pub fn mesh_size(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    /// Global vertex id of the element's local vertex (0..3).
    pub fn vertex_of(&self, element: usize, local: usize) -> usize {
        self.tri.triangles[element][local]
    }

    /// Integer lattice coordinates (on the n-grid) of a coarse vertex.
    pub fn lattice_of_vertex(&self, v: usize) -> [i64; 2] {
        let w = self.n + 1;
        [(v % w) as i64, (v / w) as i64]
    }
}

/// Build the structured coarse mesh; `n >= 2` so that at least one interior
/// vertex exists.
pub fn build_structured_coarse(n: usize) -> Result<CoarseMesh> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "coarse divisions n must be >= 2, got {n}"
        )));
    }
    Ok(CoarseMesh {
        n,
        tri: Arc::new(structured_unit_square(n)),
    })
}

/// Uniform refinement of one coarse element. Vertices live on the barycentric
/// lattice (i, j), i + j <= m with m = 2^level; their positions are derived
/// from integer coordinates on the global (n*m)-lattice, so shared-edge
/// vertices of adjacent elements agree bitwise.
#[derive(Clone, Debug)]
pub struct FineMesh {
    /// Coarse element this mesh refines.
    pub parent: usize,
    /// Number of red refinements applied.
    pub level: u32,
    /// Subdivisions per parent edge: 2^level.
    pub subdivisions: usize,
    /// Local triangulation; constrained = fine vertices on the parent
    /// boundary.
    pub tri: TriMesh,
    /// Global integer lattice coordinates (on the (n*2^level)-grid) per local
    /// vertex.
    pub lattice: Vec<[i64; 2]>,
    /// Barycentric lattice coordinates (i, j) per local vertex, i + j <= m.
    pub bary: Vec<[usize; 2]>,
}

impl FineMesh {
    /// Fine vertices on the parent element boundary.
    pub fn boundary_vertex_ids(&self) -> Vec<usize> {
        (0..self.tri.num_vertices()).filter(|&v| self.tri.constrained[v]).collect()
    }

    /// Barycentric coordinates of a local vertex with respect to the parent
    /// triangle; exact dyadic values.
    pub fn parent_barycentric(&self, v: usize) -> [f64; 3] {
        let m = self.subdivisions as f64;
        let [i, j] = self.bary[v];
        [
            (self.subdivisions - i - j) as f64 / m,
            i as f64 / m,
            j as f64 / m,
        ]
    }

    /// Fine mesh size: parent legs are 1/n, hypotenuse sqrt(2)/n.
    pub fn mesh_size(&self, coarse_n: usize) -> f64 {
        std::f64::consts::SQRT_2 / (coarse_n * self.subdivisions) as f64
    }
}

/// Index of barycentric lattice vertex (i, j) in the row-by-row numbering.
fn lattice_index(m: usize, i: usize, j: usize) -> usize {
    // rows j = 0..m, row j holds m+1-j vertices
    j * (m + 1) - j * (j.saturating_sub(1)) / 2 + i
}

/// Refine one coarse element `level` times.
pub fn refine_element(coarse: &CoarseMesh, element: usize, level: u32) -> Result<FineMesh> {
    if element >= coarse.num_elements() {
        return Err(Error::InvalidArgument(format!(
            "element id {element} out of range (mesh has {})",
            coarse.num_elements()
        )));
    }
    let m = 1usize << level;
    let big_n = coarse.n * m;
    let nf = big_n as f64;
    let gv: Vec<[i64; 2]> = (0..3)
        .map(|l| coarse.lattice_of_vertex(coarse.vertex_of(element, l)))
        .collect();
    let (g0, g1, g2) = (gv[0], gv[1], gv[2]);

    let num_vertices = (m + 1) * (m + 2) / 2;
    let mut points = Vec::with_capacity(num_vertices);
    let mut constrained = Vec::with_capacity(num_vertices);
    let mut lattice = Vec::with_capacity(num_vertices);
    let mut bary = Vec::with_capacity(num_vertices);
    for j in 0..=m {
        for i in 0..=(m - j) {
            let lx = g0[0] * m as i64 + i as i64 * (g1[0] - g0[0]) + j as i64 * (g2[0] - g0[0]);
            let ly = g0[1] * m as i64 + i as i64 * (g1[1] - g0[1]) + j as i64 * (g2[1] - g0[1]);
            points.push(Point::new(lx as f64 / nf, ly as f64 / nf));
            lattice.push([lx, ly]);
            bary.push([i, j]);
            constrained.push(i == 0 || j == 0 || i + j == m);
        }
    }
    let mut triangles = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..(m - j) {
            let v = |i, j| lattice_index(m, i, j);
            triangles.push([v(i, j), v(i + 1, j), v(i, j + 1)]);
            if i + j + 2 <= m {
                triangles.push([v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
    }
    let (interior_vertex_ids, dof_of_vertex) = TriMesh::rebuild_dof_maps(points.len(), &constrained);
    Ok(FineMesh {
        parent: element,
        level,
        subdivisions: m,
        tri: TriMesh {
            points,
            triangles,
            constrained,
            interior_vertex_ids,
            dof_of_vertex,
            structured_div: None,
        },
        lattice,
        bary,
    })
}

/// The conforming union of all per-element fine meshes: the structured
/// triangulation with `n * 2^level` divisions, plus the maps from each
/// element's local fine vertices into global fine vertex ids.
#[derive(Clone, Debug)]
pub struct GlobalFineMesh {
    /// Divisions per side: n * 2^level.
    pub divisions: usize,
    pub level: u32,
    pub tri: Arc<TriMesh>,
    /// Coarse element containing each fine triangle.
    pub parent_of_triangle: Vec<usize>,
    /// For each coarse element, local fine vertex id -> global fine vertex
    /// id, in the vertex order of `refine_element`.
    pub element_injections: Vec<Vec<usize>>,
}

impl GlobalFineMesh {
    pub fn mesh_size(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.divisions as f64
    }
}

/// Build the global fine mesh for a uniform refinement level shared by all
/// elements.
pub fn build_global_fine(coarse: &CoarseMesh, level: u32) -> Result<GlobalFineMesh> {
    let m = 1usize << level;
    let big_n = coarse.n * m;
    let tri = structured_unit_square(big_n);

    // Parent of each fine triangle, by integer arithmetic on cell indices.
    let mut parent_of_triangle = Vec::with_capacity(tri.num_triangles());
    for t in 0..tri.num_triangles() {
        let s = t / 2;
        let lower = t % 2 == 0;
        let (ci, cj) = (s % big_n, s / big_n);
        let (si, sj) = (ci / m, cj / m);
        let (u, v) = (ci % m, cj % m);
        let coarse_lower = match u.cmp(&v) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => lower,
        };
        let square = sj * coarse.n + si;
        parent_of_triangle.push(2 * square + usize::from(!coarse_lower));
    }

    // Vertex injections via the shared integer lattice.
    let w = big_n as i64 + 1;
    let mut element_injections = Vec::with_capacity(coarse.num_elements());
    for k in 0..coarse.num_elements() {
        let fine = refine_element(coarse, k, level)?;
        element_injections.push(
            fine.lattice
                .iter()
                .map(|&[lx, ly]| (ly * w + lx) as usize)
                .collect(),
        );
    }

    Ok(GlobalFineMesh {
        divisions: big_n,
        level,
        tri: Arc::new(tri),
        parent_of_triangle,
        element_injections,
    })
}

/// Two functions may be combined when their meshes are the same object or
/// structurally the same structured triangulation.
pub fn same_space(a: &TriMesh, b: &TriMesh) -> bool {
    std::ptr::eq(a, b)
        || (a.structured_div.is_some()
            && a.structured_div == b.structured_div
            && a.num_vertices() == b.num_vertices())
}

/// Pairwise conformity check: any two triangles share nothing, one vertex,
/// or one full edge. Quadratic; intended for tests on small meshes.
pub fn check_conforming(mesh: &TriMesh) -> bool {
    let nt = mesh.num_triangles();
    for t in 0..nt {
        for s in (t + 1)..nt {
            let shared: Vec<usize> = mesh.triangles[t]
                .iter()
                .filter(|v| mesh.triangles[s].contains(v))
                .copied()
                .collect();
            match shared.len() {
                0 | 1 => {}
                2 => {
                    // Shared pair must be an edge of both triangles (always
                    // true for vertex triples) and geometry must agree.
                    let p0 = mesh.points[shared[0]];
                    let p1 = mesh.points[shared[1]];
                    if (p0.x - p1.x).abs() < GEOM_TOL && (p0.y - p1.y).abs() < GEOM_TOL {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coarse_counts_follow_structured_formulas() {
        for n in [2usize, 4, 8] {
            let mesh = build_structured_coarse(n).unwrap();
            assert_eq!(mesh.tri.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(mesh.tri.num_triangles(), 2 * n * n);
            assert_eq!(mesh.tri.interior_vertex_ids.len(), (n - 1) * (n - 1));
        }
    }

    #[test]
    fn coarse_rejects_n_below_two() {
        assert!(matches!(build_structured_coarse(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_structured_coarse(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn coarse_triangles_are_ccw_and_partition_the_square() {
        let mesh = build_structured_coarse(8).unwrap();
        for t in 0..mesh.tri.num_triangles() {
            assert!(mesh.tri.triangle_area(t) > 0.0);
        }
        assert!((mesh.tri.total_area() - 1.0).abs() < GEOM_TOL);
    }

    #[test]
    fn coarse_boundary_flags_match_geometry() {
        let mesh = build_structured_coarse(4).unwrap();
        for (v, p) in mesh.tri.points.iter().enumerate() {
            let on_boundary = p.x.abs() < GEOM_TOL
                || (p.x - 1.0).abs() < GEOM_TOL
                || p.y.abs() < GEOM_TOL
                || (p.y - 1.0).abs() < GEOM_TOL;
            assert_eq!(mesh.tri.constrained[v], on_boundary);
        }
    }

    #[test]
    fn refine_level_zero_is_the_parent_triangle() {
        let coarse = build_structured_coarse(4).unwrap();
        let fine = refine_element(&coarse, 5, 0).unwrap();
        assert_eq!(fine.tri.num_triangles(), 1);
        assert_eq!(fine.tri.num_vertices(), 3);
        assert!(fine.tri.constrained.iter().all(|&c| c));
        assert_eq!(fine.tri.num_dofs(), 0);
    }

    #[test]
    fn refine_level_two_counts() {
        let coarse = build_structured_coarse(4).unwrap();
        let fine = refine_element(&coarse, 0, 2).unwrap();
        assert_eq!(fine.tri.num_triangles(), 16);
        assert_eq!(fine.tri.num_vertices(), 15);
        // interior vertices of a level-r refined triangle: (2^r-1)(2^r-2)/2
        assert_eq!(fine.tri.num_dofs(), 3);
    }

    #[test]
    fn refine_level_one_puts_edge_midpoints_on_the_parent_boundary() {
        let coarse = build_structured_coarse(2).unwrap();
        let k = 3;
        let fine = refine_element(&coarse, k, 1).unwrap();
        let parent: Vec<Point> = (0..3).map(|l| coarse.tri.points[coarse.vertex_of(k, l)]).collect();
        let mids = [
            Point::new(0.5 * (parent[0].x + parent[1].x), 0.5 * (parent[0].y + parent[1].y)),
            Point::new(0.5 * (parent[1].x + parent[2].x), 0.5 * (parent[1].y + parent[2].y)),
            Point::new(0.5 * (parent[0].x + parent[2].x), 0.5 * (parent[0].y + parent[2].y)),
        ];
        for mid in mids {
            let found = fine
                .tri
                .points
                .iter()
                .position(|p| (p.x - mid.x).abs() < GEOM_TOL && (p.y - mid.y).abs() < GEOM_TOL)
                .expect("edge midpoint must be a fine vertex");
            assert!(fine.tri.constrained[found]);
        }
    }

    #[test]
    fn refined_triangles_partition_the_parent() {
        let coarse = build_structured_coarse(4).unwrap();
        for k in [0usize, 7, 31] {
            for level in [0u32, 1, 3] {
                let fine = refine_element(&coarse, k, level).unwrap();
                let parent_area = coarse.tri.triangle_area(k);
                assert!((fine.tri.total_area() - parent_area).abs() < GEOM_TOL);
                assert_eq!(fine.tri.num_triangles(), 4usize.pow(level));
                for t in 0..fine.tri.num_triangles() {
                    assert!(fine.tri.triangle_area(t) > 0.0);
                }
            }
        }
    }

    #[test]
    fn parent_vertices_appear_in_the_fine_mesh() {
        let coarse = build_structured_coarse(4).unwrap();
        let fine = refine_element(&coarse, 9, 3).unwrap();
        for l in 0..3 {
            let p = coarse.tri.points[coarse.vertex_of(9, l)];
            assert!(fine
                .tri
                .points
                .iter()
                .any(|q| (q.x - p.x).abs() < GEOM_TOL && (q.y - p.y).abs() < GEOM_TOL));
        }
    }

    #[test]
    fn global_fine_counts_and_identity_case() {
        let coarse = build_structured_coarse(2).unwrap();
        let fine1 = build_global_fine(&coarse, 1).unwrap();
        assert_eq!(fine1.tri.num_triangles(), 2 * 4 * 4);

        let fine0 = build_global_fine(&coarse, 0).unwrap();
        assert_eq!(fine0.tri.num_triangles(), coarse.tri.num_triangles());
        assert_eq!(fine0.tri.num_vertices(), coarse.tri.num_vertices());
        for (p, q) in fine0.tri.points.iter().zip(coarse.tri.points.iter()) {
            assert_eq!(p, q);
        }
    }

    #[test]
    fn every_global_fine_vertex_is_hit_by_an_injection() {
        for (n, level) in [(2usize, 1u32), (3, 2), (4, 0)] {
            let coarse = build_structured_coarse(n).unwrap();
            let fine = build_global_fine(&coarse, level).unwrap();
            let mut hit = vec![false; fine.tri.num_vertices()];
            for inj in &fine.element_injections {
                for &g in inj {
                    hit[g] = true;
                }
            }
            assert!(hit.iter().all(|&h| h));
        }
    }

    #[test]
    fn injections_agree_with_coordinates_bitwise() {
        let coarse = build_structured_coarse(3).unwrap();
        let global = build_global_fine(&coarse, 2).unwrap();
        for k in 0..coarse.num_elements() {
            let fine = refine_element(&coarse, k, 2).unwrap();
            for (v, &g) in global.element_injections[k].iter().enumerate() {
                let p = fine.tri.points[v];
                let q = global.tri.points[g];
                assert_eq!(p, q, "element {k} vertex {v}");
            }
        }
    }

    #[test]
    fn shared_edges_induce_identical_fine_vertex_sets() {
        // Adjacent elements 0 and 1 share the diagonal of the first cell.
        let coarse = build_structured_coarse(2).unwrap();
        let f0 = refine_element(&coarse, 0, 2).unwrap();
        let f1 = refine_element(&coarse, 1, 2).unwrap();
        let on_shared = |f: &FineMesh| -> Vec<[i64; 2]> {
            let mut v: Vec<[i64; 2]> = f
                .lattice
                .iter()
                .filter(|&&[x, y]| x == y && x <= 4)
                .copied()
                .collect();
            v.sort_unstable();
            v
        };
        let (s0, s1) = (on_shared(&f0), on_shared(&f1));
        assert_eq!(s0.len(), 5);
        assert_eq!(s0, s1);
    }

    #[test]
    fn parent_of_triangle_contains_the_fine_centroids() {
        let coarse = build_structured_coarse(3).unwrap();
        let global = build_global_fine(&coarse, 2).unwrap();
        for t in 0..global.tri.num_triangles() {
            let [a, b, c] = global.tri.triangle_points(t);
            let centroid = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
            let parent = global.parent_of_triangle[t];
            let [pa, pb, pc] = coarse.tri.triangle_points(parent);
            let lam = barycentric(pa, pb, pc, centroid);
            assert!(lam.iter().all(|&l| l >= -GEOM_TOL), "triangle {t} not in parent {parent}");
        }
    }

    #[test]
    fn meshes_are_conforming() {
        let coarse = build_structured_coarse(3).unwrap();
        assert!(check_conforming(&coarse.tri));
        let fine = refine_element(&coarse, 4, 2).unwrap();
        assert!(check_conforming(&fine.tri));
        let global = build_global_fine(&coarse, 1).unwrap();
        assert!(check_conforming(&global.tri));
    }

    #[test]
    fn locate_centroid_returns_that_triangle() {
        let coarse = build_structured_coarse(4).unwrap();
        for t in [0usize, 5, 17, 31] {
            let [a, b, c] = coarse.tri.triangle_points(t);
            let centroid = Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
            let (found, lam) = coarse.tri.locate(centroid).unwrap();
            assert_eq!(found, t);
            for l in lam {
                assert!((l - 1.0 / 3.0).abs() < GEOM_TOL);
            }
        }
    }

    #[test]
    fn locate_vertex_gives_unit_barycentric() {
        let coarse = build_structured_coarse(4).unwrap();
        let v = coarse.tri.interior_vertex_ids[3];
        let (t, lam) = coarse.tri.locate(coarse.tri.points[v]).unwrap();
        assert!(coarse.tri.triangles[t].contains(&v));
        assert!(lam.iter().any(|&l| (l - 1.0).abs() < GEOM_TOL));
    }

    #[test]
    fn locate_edge_tie_breaks_to_lowest_incident_id() {
        let coarse = build_structured_coarse(2).unwrap();
        let p = Point::new(0.5 + 1e-13, 0.5);
        let (t, _) = coarse.tri.locate(p).unwrap();
        // All triangles incident to the center vertex contain p within the
        // tolerance; the lowest id must win.
        let lowest = (0..coarse.tri.num_triangles())
            .find(|&s| coarse.tri.bary_in(s, p).iter().all(|&l| l >= -LOCATE_TOL))
            .unwrap();
        assert_eq!(t, lowest);
    }

    #[test]
    fn locate_rejects_outside_points() {
        let coarse = build_structured_coarse(2).unwrap();
        assert!(matches!(
            coarse.tri.locate(Point::new(1.5, 0.2)),
            Err(Error::OutOfDomain(_, _))
        ));
        assert!(matches!(
            coarse.tri.locate(Point::new(0.2, -0.7)),
            Err(Error::OutOfDomain(_, _))
        ));
    }

    proptest! {
        #[test]
        fn locate_returns_consistent_barycentric(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let coarse = build_structured_coarse(5).unwrap();
            let p = Point::new(x, y);
            let (t, lam) = coarse.tri.locate(p).unwrap();
            prop_assert!(lam.iter().all(|&l| (-LOCATE_TOL..=1.0 + LOCATE_TOL).contains(&l)));
            prop_assert!((lam.iter().sum::<f64>() - 1.0).abs() < GEOM_TOL);
            let [a, b, c] = coarse.tri.triangle_points(t);
            let rx = lam[0] * a.x + lam[1] * b.x + lam[2] * c.x;
            let ry = lam[0] * a.y + lam[1] * b.y + lam[2] * c.y;
            prop_assert!((rx - x).abs() < 1e-9 && (ry - y).abs() < 1e-9);
        }

        #[test]
        fn fine_triangles_nest_in_their_parent(k in 0usize..8, level in 0u32..4) {
            let coarse = build_structured_coarse(2).unwrap();
            let fine = refine_element(&coarse, k, level).unwrap();
            let [pa, pb, pc] = coarse.tri.triangle_points(k);
            for t in 0..fine.tri.num_triangles() {
                let [a, b, c] = fine.tri.triangle_points(t);
                for q in [a, b, c] {
                    let lam = barycentric(pa, pb, pc, q);
                    prop_assert!(lam.iter().all(|&l| l >= -GEOM_TOL));
                }
            }
        }
    }
}
