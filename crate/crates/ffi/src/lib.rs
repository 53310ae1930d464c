//! C ABI for roofgraph.
//!
//! Clouds, wireframes and scored graphs are opaque handles created by
//! `rg_*_new`/`rg_*_read`/`rg_reconstruct`/`rg_score` and released with the
//! matching `rg_*_free`. Every fallible function returns an [`RgStatus`];
//! on failure a description is available from [`rg_last_error`] on the same
//! thread until the next failing call. Array getters copy into caller-owned
//! buffers and report the full length, so a call with a zero capacity
//! returns the size to allocate.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::Point3;
use roofgraph::reconstruct::{CornerMethod, WireMethod};
use roofgraph::{
    evaluate, normalize_to_range, read_obj_wireframe, read_xyz, score_graph, triangulate, write_obj_wireframe, Error,
    PointCloud, ReconstructionParams, ScoredGraph, Wireframe,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument or parameter value is out of range.
    InvalidArgument = 2,
    /// A file could not be parsed.
    Parse = 3,
    /// The cloud could not be triangulated.
    Triangulation = 4,
    /// A file could not be opened, read or written.
    Io = 5,
    /// An unexpected internal failure.
    Internal = 6,
}

/// Corner selection strategy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgCornerMethod {
    Planar = 0,
    Nms = 1,
}

/// Wire selection strategy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgWireMethod {
    Planar = 0,
    PathScore = 1,
}

/// Reconstruction parameters; obtain defaults from [`rg_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgParams {
    pub k: usize,
    pub nms_radius: f64,
    pub corner_threshold: f64,
    pub wire_scale_threshold: f64,
    pub max_straightness_deviation: f64,
    pub xy_epsilon: f64,
    pub exclude_boundary_edges: bool,
    pub corner_method: RgCornerMethod,
    pub wire_method: RgWireMethod,
    pub plane_tolerance: f64,
    pub min_region_area: f64,
    pub long_edge_factor: f64,
    pub simplify_tolerance: f64,
    pub crease_distance: f64,
    pub min_side_length: f64,
    pub max_corner_shift: f64,
    pub corner_merge_radius: f64,
}

impl From<&ReconstructionParams> for RgParams {
    fn from(p: &ReconstructionParams) -> Self {
        Self {
            k: p.k,
            nms_radius: p.nms_radius,
            corner_threshold: p.corner_threshold,
            wire_scale_threshold: p.wire_scale_threshold,
            max_straightness_deviation: p.max_straightness_deviation,
            xy_epsilon: p.xy_epsilon,
            exclude_boundary_edges: p.exclude_boundary_edges,
            corner_method: match p.corner_method {
                CornerMethod::Planar => RgCornerMethod::Planar,
                CornerMethod::Nms => RgCornerMethod::Nms,
            },
            wire_method: match p.wire_method {
                WireMethod::Planar => RgWireMethod::Planar,
                WireMethod::PathScore => RgWireMethod::PathScore,
            },
            plane_tolerance: p.plane_tolerance,
            min_region_area: p.min_region_area,
            long_edge_factor: p.long_edge_factor,
            simplify_tolerance: p.simplify_tolerance,
            crease_distance: p.crease_distance,
            min_side_length: p.min_side_length,
            max_corner_shift: p.max_corner_shift,
            corner_merge_radius: p.corner_merge_radius,
        }
    }
}

impl From<&RgParams> for ReconstructionParams {
    fn from(p: &RgParams) -> Self {
        Self {
            k: p.k,
            nms_radius: p.nms_radius,
            corner_threshold: p.corner_threshold,
            wire_scale_threshold: p.wire_scale_threshold,
            max_straightness_deviation: p.max_straightness_deviation,
            xy_epsilon: p.xy_epsilon,
            exclude_boundary_edges: p.exclude_boundary_edges,
            corner_method: match p.corner_method {
                RgCornerMethod::Planar => CornerMethod::Planar,
                RgCornerMethod::Nms => CornerMethod::Nms,
            },
            wire_method: match p.wire_method {
                RgWireMethod::Planar => WireMethod::Planar,
                RgWireMethod::PathScore => WireMethod::PathScore,
            },
            plane_tolerance: p.plane_tolerance,
            min_region_area: p.min_region_area,
            long_edge_factor: p.long_edge_factor,
            simplify_tolerance: p.simplify_tolerance,
            crease_distance: p.crease_distance,
            min_side_length: p.min_side_length,
            max_corner_shift: p.max_corner_shift,
            corner_merge_radius: p.corner_merge_radius,
        }
    }
}

/// Evaluation metrics: distances in cloud units, percentages in `[0, 100]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RgEvalReport {
    pub wed: f64,
    pub aco: f64,
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub ep: f64,
    pub er: f64,
    pub ef1: f64,
}

/// Opaque point cloud.
pub struct RgCloud(PointCloud);

/// Opaque wireframe.
pub struct RgWireframe(Wireframe);

/// Opaque scored Delaunay graph.
pub struct RgScoredGraph(ScoredGraph);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::Format { .. } | Error::Config { .. } => RgStatus::Parse,
            Error::Triangulation(_) => RgStatus::Triangulation,
            Error::Io(_) => RgStatus::Io,
            Error::EmptyInput
            | Error::Contract(_)
            | Error::InvalidSpec(_)
            | Error::InvalidPerturbation(_)
            | Error::NoPath { .. } => RgStatus::InvalidArgument,
            Error::DegenerateFace(_) => RgStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(RgStatus::Io, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RgStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "internal error".into());
            set_last_error(message);
            RgStatus::Internal
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure(RgStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `values` into `out[..capacity]` and returns the full length.
unsafe fn copy_out<T: Copy>(values: &[T], out: *mut T, capacity: usize) -> usize {
    if !out.is_null() {
        let n = values.len().min(capacity);
        ptr::copy_nonoverlapping(values.as_ptr(), out, n);
    }
    values.len()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the default reconstruction parameters to `out`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `RgParams`.
#[no_mangle]
pub unsafe extern "C" fn rg_params_default(out: *mut RgParams) -> RgStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = RgParams::from(&ReconstructionParams::default());
        Ok(())
    })
}

/// Checks `params` for out-of-range values.
///
/// # Safety
/// `params` must be null or point to a valid `RgParams`.
#[no_mangle]
pub unsafe extern "C" fn rg_params_validate(params: *const RgParams) -> RgStatus {
    guard(|| Ok(ReconstructionParams::from(reference(params, "params")?).validate()?))
}

/// Builds a cloud from `count` interleaved `x, y, z` triples.
///
/// # Safety
/// `xyz` must point to `3 * count` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_cloud_new(xyz: *const f64, count: usize, out: *mut *mut RgCloud) -> RgStatus {
    guard(|| {
        if xyz.is_null() && count > 0 {
            return Err(null("xyz"));
        }
        let flat = if count == 0 { &[][..] } else { std::slice::from_raw_parts(xyz, 3 * count) };
        let coords: Vec<[f64; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        store(out, RgCloud(PointCloud::from_xyz(&coords)?))
    })
}

/// Reads a whitespace-separated XYZ file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_cloud_read(path: *const c_char, out: *mut *mut RgCloud) -> RgStatus {
    guard(|| {
        let file = File::open(path_arg(path)?)?;
        store(out, RgCloud(read_xyz(BufReader::new(file))?))
    })
}

/// Number of points, 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_cloud_len(cloud: *const RgCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `cloud` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rg_cloud_free(cloud: *mut RgCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Reconstructs the wireframe of `cloud`, in the cloud's coordinates.
/// A null `params` uses the defaults.
///
/// # Safety
/// `cloud` must be a live handle, `params` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_reconstruct(
    cloud: *const RgCloud,
    params: *const RgParams,
    out: *mut *mut RgWireframe,
) -> RgStatus {
    guard(|| {
        let cloud = reference(cloud, "cloud")?;
        let params = params.as_ref().map(ReconstructionParams::from).unwrap_or_default();
        store(out, RgWireframe(roofgraph::reconstruct(&cloud.0, &params)?))
    })
}

/// Builds a wireframe from `corner_count` interleaved `x, y, z` triples and
/// `wire_count` pairs of corner indices.
///
/// # Safety
/// `corners` must point to `3 * corner_count` doubles, `wires` to
/// `2 * wire_count` indices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_wireframe_new(
    corners: *const f64,
    corner_count: usize,
    wires: *const usize,
    wire_count: usize,
    out: *mut *mut RgWireframe,
) -> RgStatus {
    guard(|| {
        if (corners.is_null() && corner_count > 0) || (wires.is_null() && wire_count > 0) {
            return Err(null("corners or wires"));
        }
        let c = if corner_count == 0 { &[][..] } else { std::slice::from_raw_parts(corners, 3 * corner_count) };
        let w = if wire_count == 0 { &[][..] } else { std::slice::from_raw_parts(wires, 2 * wire_count) };
        let corners = c.chunks_exact(3).map(|p| Point3::new(p[0], p[1], p[2])).collect();
        let wires = w.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        store(out, RgWireframe(Wireframe::new(corners, wires)?))
    })
}

/// Reads a wireframe OBJ file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_wireframe_read(path: *const c_char, out: *mut *mut RgWireframe) -> RgStatus {
    guard(|| {
        let file = File::open(path_arg(path)?)?;
        store(out, RgWireframe(read_obj_wireframe(BufReader::new(file))?))
    })
}

/// Writes a wireframe as OBJ.
///
/// # Safety
/// `wireframe` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rg_wireframe_write(wireframe: *const RgWireframe, path: *const c_char) -> RgStatus {
    guard(|| {
        let w = reference(wireframe, "wireframe")?;
        let mut out = BufWriter::new(File::create(path_arg(path)?)?);
        write_obj_wireframe(&w.0, &mut out)?;
        out.flush()?;
        Ok(())
    })
}

/// Copies up to `capacity` corners as `x, y, z` triples into `out` (which
/// may be null) and returns the number of corners.
///
/// # Safety
/// `wireframe` must be null or live; `out` null or writable for
/// `3 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_wireframe_corners(wireframe: *const RgWireframe, out: *mut f64, capacity: usize) -> usize {
    let Some(w) = wireframe.as_ref() else { return 0 };
    let flat: Vec<f64> = w.0.corners.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    copy_out(&flat, out, 3 * capacity) / 3
}

/// Copies up to `capacity` wires as index pairs into `out` (which may be
/// null) and returns the number of wires.
///
/// # Safety
/// `wireframe` must be null or live; `out` null or writable for
/// `2 * capacity` indices.
#[no_mangle]
pub unsafe extern "C" fn rg_wireframe_wires(wireframe: *const RgWireframe, out: *mut usize, capacity: usize) -> usize {
    let Some(w) = wireframe.as_ref() else { return 0 };
    let flat: Vec<usize> = w.0.wires.iter().flat_map(|&(a, b)| [a, b]).collect();
    copy_out(&flat, out, 2 * capacity) / 2
}

/// # Safety
/// `wireframe` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rg_wireframe_free(wireframe: *mut RgWireframe) {
    if !wireframe.is_null() {
        drop(Box::from_raw(wireframe));
    }
}

/// Evaluates `pred` against `gt` with corner match distance `threshold`.
/// When `frame` is not null both wireframes are first mapped into that
/// cloud's normalized frame.
///
/// # Safety
/// `pred` and `gt` must be live handles, `frame` null or live, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rg_evaluate(
    pred: *const RgWireframe,
    gt: *const RgWireframe,
    threshold: f64,
    frame: *const RgCloud,
    out: *mut RgEvalReport,
) -> RgStatus {
    guard(|| {
        let (pred, gt) = (reference(pred, "pred")?, reference(gt, "gt")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = match frame.as_ref() {
            Some(cloud) => {
                let (_, t) = normalize_to_range(&cloud.0)?;
                evaluate(&t.apply_wireframe(&pred.0), &t.apply_wireframe(&gt.0), threshold)?
            }
            None => evaluate(&pred.0, &gt.0, threshold)?,
        };
        *out = RgEvalReport { wed: r.wed, aco: r.aco, cp: r.cp, cr: r.cr, cf1: r.cf1, ep: r.ep, er: r.er, ef1: r.ef1 };
        Ok(())
    })
}

/// Triangulates and scores `cloud` as given (no normalization).
///
/// # Safety
/// `cloud` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_score(cloud: *const RgCloud, xy_epsilon: f64, out: *mut *mut RgScoredGraph) -> RgStatus {
    guard(|| {
        let cloud = reference(cloud, "cloud")?;
        let graph = triangulate(&cloud.0, xy_epsilon)?;
        store(out, RgScoredGraph(score_graph(graph, &cloud.0)?))
    })
}

/// Copies up to `capacity` vertex corner scores into `out` (which may be
/// null) and returns the number of graph vertices.
///
/// # Safety
/// `graph` must be null or live; `out` null or writable for `capacity`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_scored_corner_scores(graph: *const RgScoredGraph, out: *mut f64, capacity: usize) -> usize {
    graph.as_ref().map_or(0, |g| copy_out(&g.0.corner_scores, out, capacity))
}

/// Copies up to `capacity` edges as vertex index pairs into `edges` and
/// their dihedral angles into `angles` (either may be null) and returns the
/// number of edges.
///
/// # Safety
/// `graph` must be null or live; `edges` null or writable for
/// `2 * capacity` indices; `angles` null or writable for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_scored_edges(
    graph: *const RgScoredGraph,
    edges: *mut usize,
    angles: *mut f64,
    capacity: usize,
) -> usize {
    let Some(g) = graph.as_ref() else { return 0 };
    let flat: Vec<usize> = g.0.graph.edges.iter().flat_map(|e| *e).collect();
    copy_out(&flat, edges, 2 * capacity);
    copy_out(&g.0.edge_angles, angles, capacity)
}

/// Copies up to `capacity` graph vertex positions as `x, y, z` triples
/// into `out` (which may be null) and returns the number of vertices.
/// Vertices are the cloud's points with `(x, y)` duplicates merged.
///
/// # Safety
/// `graph` must be null or live; `out` null or writable for `3 * capacity`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_scored_vertices(graph: *const RgScoredGraph, out: *mut f64, capacity: usize) -> usize {
    let Some(g) = graph.as_ref() else { return 0 };
    let flat: Vec<f64> = g.0.graph.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    copy_out(&flat, out, 3 * capacity) / 3
}

/// # Safety
/// `graph` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rg_scored_free(graph: *mut RgScoredGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}
