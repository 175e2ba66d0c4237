//! Meshes, scalar fields and the conversions between them.

pub mod bvh;
pub mod field;
pub mod halfedge;
pub mod laplacian;
pub mod mc;
pub mod mesh;
pub mod remesh;
pub mod sdf;
pub mod subdivide;

pub use bvh::TriangleBvh;
pub use field::{Aabb, GridField, ScalarField};
pub use laplacian::{k_ring, laplacian_deform};
pub use mc::{marching_cubes, marching_cubes_grid};
pub use mesh::TriMesh;
pub use remesh::{remesh, remesh_default};
pub use sdf::{mesh_to_field, ExactMeshField, LazyMeshField};
pub use subdivide::{subdivide_region, Subdivision};
