//! Meshing, P1/P2 Lagrange elements, quadrature, assembly helpers and the
//! sparse direct solver shared by every 2D solver in the crate.

pub mod assemble;
pub mod basis;
pub mod field;
pub mod mesh;
pub mod meshing;
pub mod quadrature;
pub mod sparse;

pub use field::{Family, Field};
pub use mesh::{BoundaryEdge, Locator, Mesh, Region};
pub use meshing::mesh_domain;
pub use sparse::{solve_direct, CsrMatrix, DirectSolver, SparseSystem, TripletBuilder};
