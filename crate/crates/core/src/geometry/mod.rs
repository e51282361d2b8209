//! Planar surfaces with smooth boundary and their triangulations.

mod domain;
mod mesh;
mod mesher;

pub use domain::{arc_length_table, BoundaryLoop, LoopShape, Projection, SurfaceDomain};
pub use mesh::{barycentric, mesh_report, triangle_area, Locator, MeshReport, TriMesh};
pub use mesher::{build_mesh, build_mesh_with, MeshOptions};
