//! Nonconforming Morley-Wang-Xu finite elements with penalty formulations
//! for the fourth-order singular perturbation problem
//! `eps^2 |Delta^2 u| - |Delta u| = f` with clamped boundary conditions on
//! the unit square and cube.

pub mod analysis;
pub mod element;
pub mod forms;
pub mod mesh;
pub mod num;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;

pub use num::Real;

/// Double-precision 2D mesh.
pub type Mesh2 = mesh::SimplexMesh<f64, 2>;
/// Double-precision 3D mesh.
pub type Mesh3 = mesh::SimplexMesh<f64, 3>;
