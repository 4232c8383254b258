//! Signed distance fields embedded in small multilayer perceptrons.
//!
//! Surfaces are fitted to sparse point clouds with an Eikonal-regularised
//! loss, several nested surfaces can share one network, and separately
//! fitted fields are composed into one model with (smoothed) unions.
//! Marching cubes turns any field into a triangle mesh and the
//! [`metrics`] module scores reconstructions against a reference.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csg;
pub mod error;
pub mod extraction;
pub mod geometry;
pub mod metrics;
pub mod network;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{Aabb, DomainTransform, Lattice, Point3, PointCloud, ScalarGrid, TriangleMesh};
