//! Eigenfunction families: 1D Schrödinger problems, warped products over a
//! circle fiber and flat-torus joint eigenfunctions.

pub mod curve;
pub mod family;
pub mod riccati;
pub mod schrodinger;
pub mod torus;
pub mod warped;

pub use curve::Curve;
pub use family::{EigenfunctionFamily, FamilyEntry, FamilyKind, FamilyMeta, FiberMode};
pub use riccati::{reconstruct_log_amplitude, Reconstruction};
pub use schrodinger::{
    mirror_map, nearest_eigenpair, solve_1d_eigen, Discretization, Domain1D, EigenSolution, Parity, SchrodingerProblem1D,
    SolverOptions,
};
pub use torus::{torus_family, torus_joint_eigen, TorusEigen};
pub use warped::{resonant_h_grid, schrodinger_family, warped_eigenfamily, WarpedOperator, WarpedProduct};
