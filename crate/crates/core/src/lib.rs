//! Roof wireframe reconstruction from airborne point clouds.
//!
//! The pipeline triangulates the `(x, y)` projection of a cloud into a lifted
//! Delaunay graph, scores it with curvature signatures (face normals, edge
//! dihedral angles, vertex corner scores, wire path scores) and selects
//! corners and wires from the resulting candidate space. Evaluation metrics
//! and a synthetic roof generator are included so the whole chain can be
//! exercised without external data.

pub mod bench;
pub mod config;
pub mod delaunay;
pub mod error;
pub mod io;
pub mod metrics;
pub mod planar;
pub mod reconstruct;
pub mod scoring;
pub mod synth;

mod assignment;

pub use delaunay::{triangulate, DelaunayGraph, EdgeFaces};
pub use error::{Error, Result};
pub use io::{
    normalize_to_range, read_obj_wireframe, read_xyz, write_obj_wireframe, write_xyz, NormalizationTransform,
    PointCloud, Wireframe,
};
pub use metrics::{evaluate, EvalReport};
pub use reconstruct::{reconstruct, reconstruct_with_params, ReconstructionParams};
pub use scoring::{score_graph, shortest_path, PathScore, ScoredGraph};
