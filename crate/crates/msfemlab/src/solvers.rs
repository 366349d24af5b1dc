//! The four global solve paths: the multiscale Galerkin solver assembled
//! directly from fine-mesh basis gradients, its non-intrusive reformulation
//! through a plain P1 assembly with effective tensors, the Petrov-Galerkin
//! variant, and the standard P1 reference solve on the global fine mesh.
//! Plus fine-scale reconstruction and exact nested-mesh injection.
//!
//! The intrusive stiffness is deliberately assembled from the basis
//! functions' fine-mesh gradients, not from the effective tensors, so the
//! discrete equality of the two routes is a test, not a tautology.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fem::{
    assemble, assemble_rhs, interior_pattern, p1_gradients, solve_csr, relative_residual,
    CoefficientField, CsrMatrix, FeFunction, QuadratureRule, SolveMethod, SourceField,
};
use crate::mesh::{build_global_fine, CoarseMesh, GlobalFineMesh};
use crate::offline::{run_offline, CorrectorSet, OfflineData};

/// Which path produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Galerkin,
    PetrovGalerkin,
    NonIntrusive,
    Reference,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Galerkin => "galerkin",
            Variant::PetrovGalerkin => "petrov-galerkin",
            Variant::NonIntrusive => "nonintrusive",
            Variant::Reference => "reference",
        }
    }
}

/// Timings and solver quality of one run.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub offline_seconds: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub reconstruct_seconds: f64,
    pub solver_residual: f64,
    pub resolution_warning: Option<String>,
}

/// A multiscale solution: the coarse coefficients and the reconstructed
/// oscillatory field on the global fine mesh.
#[derive(Clone, Debug)]
pub struct MsfemSolution {
    pub variant: Variant,
    pub coarse: FeFunction,
    pub fine: FeFunction,
    pub diagnostics: Diagnostics,
}

/// Hat-function gradients of one coarse element.
fn hat_gradients(coarse: &CoarseMesh, element: usize) -> Result<[[f64; 2]; 3]> {
    let pts = coarse.tri.triangle_points(element);
    Ok(p1_gradients(&pts)?.0)
}

/// Gradient of a local fine P1 function on each fine triangle.
fn local_gradients(
    fine: &crate::mesh::FineMesh,
    values: &[f64],
) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(fine.tri.num_triangles());
    for t in 0..fine.tri.num_triangles() {
        let pts = fine.tri.triangle_points(t);
        let [a, b, c] = fine.tri.triangles[t];
        out.push(crate::fem::p1_gradient_of(&pts, [values[a], values[b], values[c]])?);
    }
    Ok(out)
}

/// Stiffness of the multiscale Galerkin problem, entry (j, i) equal to the
/// energy pairing of basis functions i and j, summed over fine triangles.
pub fn assemble_multiscale_stiffness(
    coarse: &CoarseMesh,
    offline: &OfflineData,
) -> Result<CsrMatrix> {
    let basis = offline
        .basis
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("offline data lacks the multiscale basis".into()))?;
    let mesh = &coarse.tri;
    let mut matrix = interior_pattern(mesh);
    for k in 0..coarse.num_elements() {
        let corr = &offline.correctors.elements[k];
        let grads: [Vec<[f64; 2]>; 3] = [
            local_gradients(&corr.fine, &basis[k].values[0])?,
            local_gradients(&corr.fine, &basis[k].values[1])?,
            local_gradients(&corr.fine, &basis[k].values[2])?,
        ];
        let mut local = [[0.0f64; 3]; 3];
        for (t, it) in corr.fine_tensor_integrals.iter().enumerate() {
            for j in 0..3 {
                for i in 0..3 {
                    local[j][i] += it.bilinear(grads[j][t], grads[i][t]);
                }
            }
        }
        let verts = mesh.triangles[k];
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
    Ok(matrix)
}

/// Stiffness of the Petrov-Galerkin problem: multiscale trial functions
/// paired against P1 hat test functions, summed over fine triangles.
pub fn assemble_pg_stiffness(coarse: &CoarseMesh, offline: &OfflineData) -> Result<CsrMatrix> {
    let basis = offline
        .basis
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("offline data lacks the multiscale basis".into()))?;
    let mesh = &coarse.tri;
    let mut matrix = interior_pattern(mesh);
    for k in 0..coarse.num_elements() {
        let corr = &offline.correctors.elements[k];
        let hats = hat_gradients(coarse, k)?;
        let grads: [Vec<[f64; 2]>; 3] = [
            local_gradients(&corr.fine, &basis[k].values[0])?,
            local_gradients(&corr.fine, &basis[k].values[1])?,
            local_gradients(&corr.fine, &basis[k].values[2])?,
        ];
        let mut local = [[0.0f64; 3]; 3];
        for (t, it) in corr.fine_tensor_integrals.iter().enumerate() {
            for j in 0..3 {
                for i in 0..3 {
                    local[j][i] += it.bilinear(hats[j], grads[i][t]);
                }
            }
        }
        let verts = mesh.triangles[k];
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
    Ok(matrix)
}

/// Load vector paired against the multiscale basis: the integrand
/// oscillates, so the quadrature runs per fine triangle.
pub fn assemble_multiscale_rhs(
    coarse: &CoarseMesh,
    offline: &OfflineData,
    f: &SourceField,
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    let basis = offline
        .basis
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("offline data lacks the multiscale basis".into()))?;
    let mesh = &coarse.tri;
    let mut rhs = vec![0.0; mesh.num_dofs()];
    for k in 0..coarse.num_elements() {
        let corr = &offline.correctors.elements[k];
        let fine = &corr.fine;
        let mut local = [0.0f64; 3];
        for t in 0..fine.tri.num_triangles() {
            let pts = fine.tri.triangle_points(t);
            let verts = fine.tri.triangles[t];
            let area = fine.tri.triangle_area(t);
            for q in 0..quad.len() {
                let p = quad.physical_point(q, &pts);
                let w = quad.weights[q] * area * f.at(p);
                let lam = quad.points[q];
                for (m, slot) in local.iter_mut().enumerate() {
                    let phi = lam[0] * basis[k].values[m][verts[0]]
                        + lam[1] * basis[k].values[m][verts[1]]
                        + lam[2] * basis[k].values[m][verts[2]];
                    *slot += w * phi;
                }
            }
        }
        for (m, &v) in mesh.triangles[k].iter().enumerate() {
            if let Some(d) = mesh.dof_of_vertex[v] {
                rhs[d] += local[m];
            }
        }
    }
    Ok(rhs)
}

/// Fine field of the Galerkin solution: the coefficient-weighted sum of the
/// local basis functions, written element-wise through the injections with
/// the lowest incident element winning shared vertices.
fn expand_basis_solution(
    coarse: &CoarseMesh,
    offline: &OfflineData,
    global: &GlobalFineMesh,
    coarse_fn: &FeFunction,
) -> Result<FeFunction> {
    let basis = offline
        .basis
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("offline data lacks the multiscale basis".into()))?;
    let mut values = vec![0.0f64; global.tri.num_vertices()];
    let mut written = vec![false; global.tri.num_vertices()];
    for k in 0..coarse.num_elements() {
        let verts = coarse.tri.triangles[k];
        let nodal = [
            coarse_fn.values[verts[0]],
            coarse_fn.values[verts[1]],
            coarse_fn.values[verts[2]],
        ];
        let inj = &global.element_injections[k];
        for (v, &g) in inj.iter().enumerate() {
            if !written[g] {
                values[g] = nodal[0] * basis[k].values[0][v]
                    + nodal[1] * basis[k].values[1][v]
                    + nodal[2] * basis[k].values[2][v];
                written[g] = true;
            }
        }
    }
    Ok(FeFunction { mesh: global.tri.clone(), values })
}

/// Reconstruct the oscillatory field from a coarse solution: per element,
/// the affine coarse values plus the gradient-weighted correctors. Corrector
/// traces vanish on shared edges, so writing each fine vertex from the
/// lowest incident element only fixes floating-point determinism.
pub fn reconstruct(
    coarse_fn: &FeFunction,
    correctors: &CorrectorSet,
    coarse: &CoarseMesh,
    global: &GlobalFineMesh,
) -> Result<FeFunction> {
    if coarse_fn.values.len() != coarse.tri.num_vertices() {
        return Err(Error::InvalidArgument(
            "coarse field does not match the coarse mesh".into(),
        ));
    }
    if correctors.elements.len() != coarse.num_elements()
        || global.element_injections.len() != coarse.num_elements()
    {
        return Err(Error::InvalidArgument(
            "correctors or global fine mesh do not match the coarse mesh".into(),
        ));
    }
    let mut values = vec![0.0f64; global.tri.num_vertices()];
    let mut written = vec![false; global.tri.num_vertices()];
    for k in 0..coarse.num_elements() {
        let verts = coarse.tri.triangles[k];
        let nodal = [
            coarse_fn.values[verts[0]],
            coarse_fn.values[verts[1]],
            coarse_fn.values[verts[2]],
        ];
        let pts = coarse.tri.triangle_points(k);
        let grad = crate::fem::p1_gradient_of(&pts, nodal)?;
        let corr = &correctors.elements[k];
        let inj = &global.element_injections[k];
        for (v, &g) in inj.iter().enumerate() {
            if !written[g] {
                let lam = corr.fine.parent_barycentric(v);
                let affine = lam[0] * nodal[0] + lam[1] * nodal[1] + lam[2] * nodal[2];
                values[g] = affine
                    + grad[0] * corr.values[0][v]
                    + grad[1] * corr.values[1][v];
                written[g] = true;
            }
        }
    }
    Ok(FeFunction { mesh: global.tri.clone(), values })
}

/// Exact interpolation of a coarse P1 field onto the nested global fine
/// mesh (reconstruction with zero correctors).
pub fn interpolate_onto_fine(
    coarse_fn: &FeFunction,
    coarse: &CoarseMesh,
    global: &GlobalFineMesh,
) -> Result<FeFunction> {
    let mut values = vec![0.0f64; global.tri.num_vertices()];
    for k in 0..coarse.num_elements() {
        let verts = coarse.tri.triangles[k];
        let nodal = [
            coarse_fn.values[verts[0]],
            coarse_fn.values[verts[1]],
            coarse_fn.values[verts[2]],
        ];
        let inj = &global.element_injections[k];
        let m = 1usize << global.level;
        for (v, &g) in inj.iter().enumerate() {
            // parent barycentric from the lattice, exact dyadic
            let fine_m = m as f64;
            let (i, j) = v_to_bary(v, m);
            let l0 = (m - i - j) as f64 / fine_m;
            let l1 = i as f64 / fine_m;
            let l2 = j as f64 / fine_m;
            values[g] = l0 * nodal[0] + l1 * nodal[1] + l2 * nodal[2];
        }
    }
    Ok(FeFunction { mesh: global.tri.clone(), values })
}

/// Inverse of the row-by-row barycentric lattice numbering.
fn v_to_bary(v: usize, m: usize) -> (usize, usize) {
    let mut j = 0usize;
    let mut offset = 0usize;
    loop {
        let row = m + 1 - j;
        if v < offset + row {
            return (v - offset, j);
        }
        offset += row;
        j += 1;
    }
}

/// Exact injection of a P1 field between nested structured meshes (source
/// divisions must divide the target's).
pub fn inject_structured(f: &FeFunction, target: &GlobalFineMesh) -> Result<FeFunction> {
    let src_n = f
        .mesh
        .structured_div
        .ok_or_else(|| Error::InvalidArgument("source mesh is not structured".into()))?;
    let dst_n = target.divisions;
    if !dst_n.is_multiple_of(src_n) {
        return Err(Error::InvalidArgument(format!(
            "target divisions {dst_n} not a multiple of source divisions {src_n}"
        )));
    }
    let s = dst_n / src_n;
    if s == 1 {
        return Ok(FeFunction { mesh: target.tri.clone(), values: f.values.clone() });
    }
    let sv = |i: usize, j: usize| j * (src_n + 1) + i;
    let sf = s as f64;
    let mut values = vec![0.0f64; target.tri.num_vertices()];
    for j in 0..=dst_n {
        for i in 0..=dst_n {
            let ci = (i / s).min(src_n - 1);
            let cj = (j / s).min(src_n - 1);
            let (u, v) = (i - ci * s, j - cj * s);
            let val = if v <= u {
                // lower triangle (a, b, c) of the source cell
                let (a, b, c) = (sv(ci, cj), sv(ci + 1, cj), sv(ci + 1, cj + 1));
                let lb = (u - v) as f64 / sf;
                let lc = v as f64 / sf;
                let la = 1.0 - lb - lc;
                la * f.values[a] + lb * f.values[b] + lc * f.values[c]
            } else {
                // upper triangle (a, c, d)
                let (a, c, d) = (sv(ci, cj), sv(ci + 1, cj + 1), sv(ci, cj + 1));
                let lc = u as f64 / sf;
                let ld = (v - u) as f64 / sf;
                let la = 1.0 - lc - ld;
                la * f.values[a] + lc * f.values[c] + ld * f.values[d]
            };
            values[j * (dst_n + 1) + i] = val;
        }
    }
    Ok(FeFunction { mesh: target.tri.clone(), values })
}

fn warn_for(coeff: &CoefficientField, coarse: &CoarseMesh, level: u32) -> Option<String> {
    let h = 1.0 / (coarse.n as f64 * (1u64 << level) as f64);
    crate::fem::resolution_warning(coeff, h)
}

/// Multiscale Galerkin solve with precomputed offline data.
pub fn solve_msfem_galerkin_with(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    offline: &OfflineData,
    global: &GlobalFineMesh,
    quad: &QuadratureRule,
) -> Result<MsfemSolution> {
    let mut diag = Diagnostics {
        resolution_warning: warn_for(coeff, coarse, offline.correctors.level),
        ..Default::default()
    };
    let t0 = Instant::now();
    let matrix = assemble_multiscale_stiffness(coarse, offline)?;
    let rhs = assemble_multiscale_rhs(coarse, offline, f, quad)?;
    diag.assembly_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let u = solve_csr(&matrix, &rhs, &SolveMethod::DirectCholesky)?;
    diag.solve_seconds = t1.elapsed().as_secs_f64();
    diag.solver_residual = relative_residual(&matrix, &u, &rhs);

    let coarse_fn = FeFunction::from_interior(coarse.tri.clone(), &u)?;
    let t2 = Instant::now();
    let fine = expand_basis_solution(coarse, offline, global, &coarse_fn)?;
    diag.reconstruct_seconds = t2.elapsed().as_secs_f64();
    Ok(MsfemSolution { variant: Variant::Galerkin, coarse: coarse_fn, fine, diagnostics: diag })
}

/// Non-intrusive solve with precomputed offline data: a plain P1 assembly
/// fed with the effective tensors, then corrector post-processing.
pub fn solve_nonintrusive_with(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    offline: &OfflineData,
    global: &GlobalFineMesh,
    quad: &QuadratureRule,
) -> Result<MsfemSolution> {
    let mut diag = Diagnostics {
        resolution_warning: warn_for(coeff, coarse, offline.correctors.level),
        ..Default::default()
    };
    let t0 = Instant::now();
    let system = assemble(&coarse.tri, &offline.tensors, f, quad)?;
    diag.assembly_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let u = solve_csr(&system.matrix, &system.rhs, &SolveMethod::DirectCholesky)?;
    diag.solve_seconds = t1.elapsed().as_secs_f64();
    diag.solver_residual = relative_residual(&system.matrix, &u, &system.rhs);

    let coarse_fn = FeFunction::from_interior(coarse.tri.clone(), &u)?;
    let t2 = Instant::now();
    let fine = reconstruct(&coarse_fn, &offline.correctors, coarse, global)?;
    diag.reconstruct_seconds = t2.elapsed().as_secs_f64();
    Ok(MsfemSolution { variant: Variant::NonIntrusive, coarse: coarse_fn, fine, diagnostics: diag })
}

/// Petrov-Galerkin solve with precomputed offline data: multiscale trial
/// space, P1 test space. The load vector is produced by the identical
/// routine the non-intrusive path uses.
pub fn solve_msfem_pg_with(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    offline: &OfflineData,
    global: &GlobalFineMesh,
    quad: &QuadratureRule,
) -> Result<MsfemSolution> {
    let mut diag = Diagnostics {
        resolution_warning: warn_for(coeff, coarse, offline.correctors.level),
        ..Default::default()
    };
    let t0 = Instant::now();
    let matrix = assemble_pg_stiffness(coarse, offline)?;
    let rhs = assemble_rhs(&coarse.tri, f, quad)?;
    diag.assembly_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let u = solve_csr(&matrix, &rhs, &SolveMethod::DirectLu)?;
    diag.solve_seconds = t1.elapsed().as_secs_f64();
    diag.solver_residual = relative_residual(&matrix, &u, &rhs);

    let coarse_fn = FeFunction::from_interior(coarse.tri.clone(), &u)?;
    let t2 = Instant::now();
    let fine = reconstruct(&coarse_fn, &offline.correctors, coarse, global)?;
    diag.reconstruct_seconds = t2.elapsed().as_secs_f64();
    Ok(MsfemSolution {
        variant: Variant::PetrovGalerkin,
        coarse: coarse_fn,
        fine,
        diagnostics: diag,
    })
}

/// Standard P1 solve on the global fine mesh.
pub fn solve_reference(
    global: &GlobalFineMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    quad: &QuadratureRule,
    method: Option<&SolveMethod>,
) -> Result<FeFunction> {
    let system = assemble(global.tri.as_ref(), coeff, f, quad)?;
    let chosen = match method {
        Some(m) => m.clone(),
        None => SolveMethod::default_for(&system.matrix),
    };
    let u = solve_csr(&system.matrix, &system.rhs, &chosen)?;
    FeFunction::from_interior(global.tri.clone(), &u)
}

/// Naive single-scale baseline: P1 on the coarse mesh with the oscillatory
/// coefficient sampled at the coarse quadrature points.
pub fn solve_standard_p1(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    quad: &QuadratureRule,
) -> Result<FeFunction> {
    let system = assemble(&coarse.tri, coeff, f, quad)?;
    let u = solve_csr(&system.matrix, &system.rhs, &SolveMethod::DirectCholesky)?;
    FeFunction::from_interior(coarse.tri.clone(), &u)
}

/// Full pipelines that build the offline data and global fine mesh on
/// demand.
pub fn solve_msfem_galerkin(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    level: u32,
    quad: &QuadratureRule,
) -> Result<MsfemSolution> {
    let t0 = Instant::now();
    let offline = run_offline(coarse, coeff, level, quad, true)?;
    let global = build_global_fine(coarse, level)?;
    let offline_seconds = t0.elapsed().as_secs_f64();
    let mut sol = solve_msfem_galerkin_with(coarse, coeff, f, &offline, &global, quad)?;
    sol.diagnostics.offline_seconds = offline_seconds;
    Ok(sol)
}

pub fn solve_nonintrusive(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    level: u32,
    quad: &QuadratureRule,
) -> Result<MsfemSolution> {
    let t0 = Instant::now();
    let offline = run_offline(coarse, coeff, level, quad, false)?;
    let global = build_global_fine(coarse, level)?;
    let offline_seconds = t0.elapsed().as_secs_f64();
    let mut sol = solve_nonintrusive_with(coarse, coeff, f, &offline, &global, quad)?;
    sol.diagnostics.offline_seconds = offline_seconds;
    Ok(sol)
}

pub fn solve_msfem_pg(
    coarse: &CoarseMesh,
    coeff: &CoefficientField,
    f: &SourceField,
    level: u32,
    quad: &QuadratureRule,
) -> Result<MsfemSolution> {
    let t0 = Instant::now();
    let offline = run_offline(coarse, coeff, level, quad, true)?;
    let global = build_global_fine(coarse, level)?;
    let offline_seconds = t0.elapsed().as_secs_f64();
    let mut sol = solve_msfem_pg_with(coarse, coeff, f, &offline, &global, quad)?;
    sol.diagnostics.offline_seconds = offline_seconds;
    Ok(sol)
}
