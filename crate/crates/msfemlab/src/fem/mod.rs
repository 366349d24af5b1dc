//! P1 finite element primitives: the coefficient catalog, quadrature rules,
//! element matrices, global sparse assembly with homogeneous Dirichlet
//! conditions, linear solvers, norms, and point evaluation.

pub mod assembly;
pub mod coefficient;
pub mod function;
pub mod linalg;
pub mod quadrature;

pub use assembly::{
    assemble, assemble_rhs, element_load, element_stiffness, element_stiffness_with,
    integrated_tensor, interior_pattern, p1_gradient_of, p1_gradients, SparseSystem,
};
pub use coefficient::{CoefficientField, DiffusionTensor, SourceField, Tensor2};
pub use function::{h1_norm_diff, h1_seminorm_diff, l2_norm_diff, FeFunction};
pub use linalg::{
    conjugate_gradient, relative_residual, solve_csr, BandCholesky, CsrMatrix, DenseLu,
    SolveMethod,
};
pub use quadrature::QuadratureRule;

use crate::error::Result;

/// Solve an assembled system.
pub fn solve_sparse(system: &SparseSystem, method: &SolveMethod) -> Result<Vec<f64>> {
    solve_csr(&system.matrix, &system.rhs, method)
}

/// Warn (do not fail) when the fine mesh does not resolve the coefficient
/// oscillation: returns a message when h > epsilon / 4.
pub fn resolution_warning(coeff: &CoefficientField, h: f64) -> Option<String> {
    coeff.epsilon().and_then(|eps| {
        if h > eps / 4.0 {
            Some(format!(
                "fine mesh size {h:.4e} exceeds epsilon/4 = {:.4e}; oscillations may be under-resolved",
                eps / 4.0
            ))
        } else {
            None
        }
    })
}
