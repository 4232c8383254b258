//! Points, meshes, grids and the coordinate normalisation between real
//! space and the training cube, plus the exact geometric queries used as
//! ground truth.

pub mod distance;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod point;
pub mod sampling;
pub mod transform;

pub use distance::{point_to_mesh_distance, signed_distance_to_mesh, MeshDistanceField};
pub use grid::{Lattice, ScalarGrid};
pub use io::{load_mesh, load_point_cloud, read_grid, save_mesh, save_point_cloud, write_grid};
pub use mesh::{PointCloud, TriangleMesh};
pub use point::{Aabb, Point3};
pub use sampling::{proportional_counts, sample_surface};
pub use transform::{apply_transform, fit_transform, invert_transform, DomainTransform};
