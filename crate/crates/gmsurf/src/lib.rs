//! gmsurf: watertight manifold triangulation of Gaussian molecular surfaces.
//!
//! The mesher approximates the field phi(x) = sum_i exp(-D(|x-x_i|^2 - r_i^2))
//! by piecewise trilinear polynomials on an adaptive octree, prunes cubes with
//! certified interval bounds derived from a two-level SVD of the local
//! Legendre coefficient tensor, and contours each surface cell along its fold
//! curves so that every patch is single-valued and the welded mesh is a
//! manifold. A brute-force marching-tetrahedra oracle and mesh validation
//! utilities ship alongside the pipeline.

pub mod bounds;
pub mod contour;
pub mod exec;
pub mod geom;
pub mod lattice;
pub mod meshkit;
pub mod molmodel;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod polyfit;
pub mod synth;

pub use geom::Vec3;
pub use meshkit::{MeshReport, TriangleMesh};
pub use molmodel::{Atom, GaussianField, NeighborGrid};
pub use pipeline::{mesh_surface, MeshConfig, PipelineOutput};
