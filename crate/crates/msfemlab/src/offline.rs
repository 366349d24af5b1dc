//! Per-element fine-scale computations: the two local correctors driven by
//! unit macroscopic gradients, the effective diffusion tensor, and the
//! multiscale basis functions with hat-function boundary traces.
//!
//! All element problems share one banded factorization of the local interior
//! stiffness matrix, and every fine-scale integral is a contraction of
//! constant P1 gradients against per-triangle integrated tensors. Element
//! problems are independent and run in parallel; results are merged in
//! element order, so output is identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    integrated_tensor, p1_gradients, BandCholesky, CoefficientField, CsrMatrix, DiffusionTensor,
    QuadratureRule, Tensor2,
};
use crate::mesh::{refine_element, CoarseMesh, FineMesh, Point};

/// The two zero-trace correctors of one element, together with the fine mesh
/// and the per-fine-triangle integrated tensors they were computed with.
#[derive(Clone, Debug)]
pub struct ElementCorrectors {
    pub element: usize,
    pub fine: FineMesh,
    /// One value per local fine vertex, zero on the element boundary;
    /// index 0 responds to e_1, index 1 to e_2.
    pub values: [Vec<f64>; 2],
    /// sum_q w_q |T| A(x_q) per local fine triangle; reused by the global
    /// multiscale assemblies so all paths integrate identically.
    pub fine_tensor_integrals: Vec<Tensor2>,
}

impl ElementCorrectors {
    /// Gradient of corrector `alpha` on local fine triangle `t`.
    pub fn corrector_gradient(&self, alpha: usize, t: usize) -> Result<[f64; 2]> {
        let pts = self.fine.tri.triangle_points(t);
        let [a, b, c] = self.fine.tri.triangles[t];
        let v = &self.values[alpha];
        crate::fem::p1_gradient_of(&pts, [v[a], v[b], v[c]])
    }
}

/// Correctors for every element of a coarse mesh, element order.
#[derive(Clone, Debug)]
pub struct CorrectorSet {
    pub level: u32,
    pub elements: Vec<ElementCorrectors>,
}

/// Per-element effective diffusion tensors; exactly the piecewise constant
/// coefficient a single-scale P1 assembly consumes.
#[derive(Clone, Debug)]
pub struct EffectiveTensor {
    pub per_element: Vec<Tensor2>,
}

impl DiffusionTensor for EffectiveTensor {
    fn tensor_at(&self, element: usize, _p: Point) -> Tensor2 {
        self.per_element[element]
    }
}

/// The three multiscale basis functions of one element (one per parent
/// vertex), as values over the local fine vertices.
#[derive(Clone, Debug)]
pub struct MultiscaleBasisLocal {
    pub element: usize,
    pub values: [Vec<f64>; 3],
}

/// Everything the offline phase produces.
#[derive(Clone, Debug)]
pub struct OfflineData {
    pub correctors: CorrectorSet,
    pub tensors: EffectiveTensor,
    pub basis: Option<Vec<MultiscaleBasisLocal>>,
}

impl OfflineData {
    pub fn num_elements(&self) -> usize {
        self.correctors.elements.len()
    }
}

/// Local interior stiffness of a fine mesh, together with per-triangle
/// gradients and integrated tensors.
pub(crate) struct LocalAssembly {
    pub matrix: CsrMatrix,
    pub grads: Vec<[[f64; 2]; 3]>,
    pub integrals: Vec<Tensor2>,
}

pub(crate) fn assemble_local(
    fine: &FineMesh,
    coeff: &CoefficientField,
    quad: &QuadratureRule,
) -> Result<LocalAssembly> {
    let mesh = &fine.tri;
    let mut matrix = crate::fem::interior_pattern(mesh);
    let nt = mesh.num_triangles();
    let mut grads = Vec::with_capacity(nt);
    let mut integrals = Vec::with_capacity(nt);
    for t in 0..nt {
        let pts = mesh.triangle_points(t);
        let (g, _) = p1_gradients(&pts).map_err(|e| {
            Error::DegenerateElement(format!("element {}, fine triangle {t}: {e}", fine.parent))
        })?;
        let it = integrated_tensor(&pts, &mut |p| coeff.at(p), quad);
        let verts = mesh.triangles[t];
        for (lj, &vj) in verts.iter().enumerate() {
            if let Some(dj) = mesh.dof_of_vertex[vj] {
                for (li, &vi) in verts.iter().enumerate() {
                    if let Some(di) = mesh.dof_of_vertex[vi] {
                        matrix.add(dj, di, it.bilinear(g[lj], g[li]));
                    }
                }
            }
        }
        grads.push(g);
        integrals.push(it);
    }
    Ok(LocalAssembly { matrix, grads, integrals })
}

/// Scatter interior dof values into a full local vertex vector on top of the
/// given boundary values.
fn lift(mesh: &crate::mesh::TriMesh, interior: &[f64], boundary: Vec<f64>) -> Vec<f64> {
    let mut out = boundary;
    for (d, &v) in mesh.interior_vertex_ids.iter().zip(interior.iter()) {
        out[*d] = v;
    }
    out
}

fn solve_element(
    fine: &FineMesh,
    coeff: &CoefficientField,
    quad: &QuadratureRule,
    with_basis: bool,
) -> Result<(ElementCorrectors, Option<MultiscaleBasisLocal>)> {
    let local = assemble_local(fine, coeff, quad)?;
    let mesh = &fine.tri;
    let ndof = mesh.num_dofs();
    let factor = if ndof > 0 {
        Some(
            BandCholesky::factor(&local.matrix)
                .map_err(|e| Error::SolverFailure(format!("element {}: {e}", fine.parent)))?,
        )
    } else {
        None
    };
    let solve = |rhs: &[f64]| -> Vec<f64> {
        match &factor {
            Some(f) => f.solve(rhs),
            None => Vec::new(),
        }
    };

    // Correctors: for all interior w, a(V_alpha, w) = -a(x_alpha, w); the
    // load pairs grad(w) against (integrated tensor) e_alpha per fine
    // triangle, so no derivative of the coefficient is ever taken.
    let mut corrector_values: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (alpha, slot) in corrector_values.iter_mut().enumerate() {
        let e_alpha = [[1.0, 0.0], [0.0, 1.0]][alpha];
        let mut rhs = vec![0.0; ndof];
        for t in 0..mesh.num_triangles() {
            let flux = local.integrals[t].apply(e_alpha);
            for (lj, &vj) in mesh.triangles[t].iter().enumerate() {
                if let Some(dj) = mesh.dof_of_vertex[vj] {
                    let g = local.grads[t][lj];
                    rhs[dj] -= g[0] * flux[0] + g[1] * flux[1];
                }
            }
        }
        let interior = solve(&rhs);
        *slot = lift(mesh, &interior, vec![0.0; mesh.num_vertices()]);
    }

    let basis = if with_basis {
        // Hat-function trace on the element boundary; the Dirichlet lift
        // moves to the load of the homogeneous interior solve.
        let mut values: [Vec<f64>; 3] = Default::default();
        for (m, slot) in values.iter_mut().enumerate() {
            let mut boundary = vec![0.0; mesh.num_vertices()];
            for v in 0..mesh.num_vertices() {
                if mesh.constrained[v] {
                    boundary[v] = fine.parent_barycentric(v)[m];
                }
            }
            let mut rhs = vec![0.0; ndof];
            for t in 0..mesh.num_triangles() {
                let verts = mesh.triangles[t];
                let gb = [boundary[verts[0]], boundary[verts[1]], boundary[verts[2]]];
                let glift = [
                    gb[0] * local.grads[t][0][0]
                        + gb[1] * local.grads[t][1][0]
                        + gb[2] * local.grads[t][2][0],
                    gb[0] * local.grads[t][0][1]
                        + gb[1] * local.grads[t][1][1]
                        + gb[2] * local.grads[t][2][1],
                ];
                if glift[0] == 0.0 && glift[1] == 0.0 {
                    continue;
                }
                let flux = local.integrals[t].apply(glift);
                for (lj, &vj) in verts.iter().enumerate() {
                    if let Some(dj) = mesh.dof_of_vertex[vj] {
                        let g = local.grads[t][lj];
                        rhs[dj] -= g[0] * flux[0] + g[1] * flux[1];
                    }
                }
            }
            let interior = solve(&rhs);
            *slot = lift(mesh, &interior, boundary);
        }
        Some(MultiscaleBasisLocal { element: fine.parent, values })
    } else {
        None
    };

    let correctors = ElementCorrectors {
        element: fine.parent,
        fine: fine.clone(),
        values: corrector_values,
        fine_tensor_integrals: local.integrals,
    };
    Ok((correctors, basis))
}

/// Solve the two corrector problems of one element.
pub fn solve_correctors(
    fine: &FineMesh,
    coeff: &CoefficientField,
    quad: &QuadratureRule,
) -> Result<ElementCorrectors> {
    solve_element(fine, coeff, quad, false).map(|(c, _)| c)
}

/// Solve the three multiscale basis problems of one element.
pub fn multiscale_basis_local(
    fine: &FineMesh,
    coeff: &CoefficientField,
    quad: &QuadratureRule,
) -> Result<MultiscaleBasisLocal> {
    solve_element(fine, coeff, quad, true).map(|(_, b)| b.expect("basis requested"))
}

/// Effective tensor of one element:
/// entry (beta, alpha) = |K|^-1 integral of
/// (e_beta + grad V_beta) . A (e_alpha + grad V_alpha),
/// the integral running over the fine triangles with the assembly rule.
pub fn effective_tensor(correctors: &ElementCorrectors) -> Result<Tensor2> {
    let mesh = &correctors.fine.tri;
    let mut acc = Tensor2::zero();
    let mut area = 0.0;
    for t in 0..mesh.num_triangles() {
        let gv1 = correctors.corrector_gradient(0, t)?;
        let gv2 = correctors.corrector_gradient(1, t)?;
        let dir = [[1.0 + gv1[0], gv1[1]], [gv2[0], 1.0 + gv2[1]]];
        let it = &correctors.fine_tensor_integrals[t];
        for beta in 0..2 {
            for alpha in 0..2 {
                acc.a[beta][alpha] += it.bilinear(dir[beta], dir[alpha]);
            }
        }
        area += mesh.triangle_area(t);
    }
    Ok(acc.scale(1.0 / area))
}

/// Largest deviation of the corrector expansion of the multiscale basis:
/// max over fine vertices and parent vertices i of
/// |phi_i - (hat_i + sum_alpha d_alpha(hat_i) V_alpha)|.
pub fn verify_expansion(
    coarse: &CoarseMesh,
    basis: &MultiscaleBasisLocal,
    correctors: &ElementCorrectors,
) -> Result<f64> {
    if basis.element != correctors.element {
        return Err(Error::InvalidArgument(
            "basis and correctors belong to different elements".into(),
        ));
    }
    let k = correctors.element;
    let pts: [Point; 3] = coarse.tri.triangle_points(k);
    let (hat_grads, _) = p1_gradients(&pts)?;
    let fine = &correctors.fine;
    let mut worst = 0.0f64;
    for m in 0..3 {
        let g = hat_grads[m];
        for v in 0..fine.tri.num_vertices() {
            let hat = fine.parent_barycentric(v)[m];
            let expanded = hat + g[0] * correctors.values[0][v] + g[1] * correctors.values[1][v];
            worst = worst.max((basis.values[m][v] - expanded).abs());
        }
    }
    Ok(worst)
}

/// Run the offline phase for every element: correctors, effective tensors,
/// and (optionally) the multiscale basis. Element problems run in parallel;
/// the merge is keyed by element id, and the first failing element aborts.
pub fn run_offline(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    level: u32,
    quad: &QuadratureRule,
    with_basis: bool,
) -> Result<OfflineData> {
    let results: Vec<Result<(ElementCorrectors, Option<MultiscaleBasisLocal>, Tensor2)>> = (0
        ..coarse.num_elements())
        .into_par_iter()
        .map(|k| {
            let fine = refine_element(coarse, k, level)?;
            let (correctors, basis) = solve_element(&fine, coeff, quad, with_basis)?;
            let tensor = effective_tensor(&correctors)?;
            Ok((correctors, basis, tensor))
        })
        .collect();

    let mut elements = Vec::with_capacity(results.len());
    let mut tensors = Vec::with_capacity(results.len());
    let mut basis = with_basis.then(Vec::new);
    for (k, r) in results.into_iter().enumerate() {
        let (correctors, b, tensor) =
            r.map_err(|e| Error::SolverFailure(format!("offline element {k}: {e}")))?;
        elements.push(correctors);
        tensors.push(tensor);
        if let (Some(list), Some(b)) = (basis.as_mut(), b) {
            list.push(b);
        }
    }
    Ok(OfflineData {
        correctors: CorrectorSet { level, elements },
        tensors: EffectiveTensor { per_element: tensors },
        basis,
    })
}
