//! Adaptive mixed finite elements for Kirchhoff-Love plate bending.
//!
//! This crate implements the lowest-order Hellan-Herrmann-Johnson (HHJ)
//! method: piecewise-constant symmetric moment tensors with a single
//! normal-normal value per edge, coupled with continuous piecewise-linear
//! deflections. On top of the mixed solver it provides
//!
//! * a conforming postprocessed deflection obtained from a global
//!   edge-bubble problem,
//! * a superconvergent nodal moment recovery based on local least-squares
//!   patch fits, together with an edge-averaging baseline,
//! * two recovery-based element error indicators and the exact error
//!   norms needed to measure them against manufactured solutions,
//! * an adaptive Solve-Estimate-Mark-Refine loop with Doerfler marking
//!   and newest-vertex-bisection refinement.
//!
//! Everything is deterministic: identical inputs produce bit-identical
//! meshes, matrices, and convergence tables.

pub mod adaptivity;
pub mod assembly;
pub mod estimators;
pub mod fe_spaces;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod report;

use thiserror::Error;

/// Errors surfaced by mesh construction, assembly, and the solvers.
#[derive(Debug, Error)]
pub enum HhjError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("solver residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("conjugate gradients did not converge: residual {residual:.3e} after {iterations} iterations")]
    CgDidNotConverge { residual: f64, iterations: usize },

    #[error("rank-deficient recovery patch at vertex {vertex}: {detail}")]
    RankDeficientPatch { vertex: usize, detail: String },

    #[error("exact solution unavailable: {0}")]
    ExactSolutionUnavailable(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HhjError>;
