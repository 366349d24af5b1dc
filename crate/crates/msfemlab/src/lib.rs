//! msfemlab: a two-scale finite element laboratory for highly oscillatory
//! diffusion problems `-div(A grad u) = f` on the unit square with
//! homogeneous Dirichlet data.
//!
//! The crate provides four global solution paths over a structured coarse
//! mesh with nested per-element fine meshes:
//!
//! * a multiscale Galerkin solver whose basis functions solve local
//!   oscillatory problems,
//! * its non-intrusive reformulation, which runs the online phase through a
//!   plain single-scale P1 assembly fed with per-element effective tensors
//!   and post-processes with local correctors,
//! * the Petrov-Galerkin variant (multiscale trial space, P1 test space),
//!   whose solution coincides with the non-intrusive output,
//! * a standard P1 reference solve on the global fine mesh.
//!
//! The `analysis` module verifies the discrete identities relating these
//! paths (stiffness equality, the corrector expansion of the multiscale
//! basis, effective tensor bounds, the coarse-component projection) and runs
//! convergence and homogenization studies. The `cli` module exposes the lot
//! as the `msfemlab` binary.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod offline;
pub mod solvers;

pub use error::{Error, Result};
