//! From a scored Delaunay graph to a predicted wireframe.
//!
//! The top-K vertices by corner score are clustered by greedy non-maximum
//! suppression into predicted corners. Every pair of corners becomes a wire
//! candidate scored by the shortest graph path between the corners' snapped
//! vertices, and candidates whose sigmoid-scaled path score clears a
//! threshold and whose path stays close to the straight segment are kept.
//!
//! Corner and wire selection sit behind [`CornerSelector`] and
//! [`WireSelector`] so other selection strategies can be swapped in.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::Point3;
use rayon::prelude::*;

use crate::delaunay::{triangulate, DEFAULT_XY_EPSILON};
use crate::error::{Error, Result};
use crate::io::{normalize_to_range, PointCloud, Wireframe};
use crate::planar;
use crate::scoring::{score_graph_with, DistanceField, ScoredGraph, ScoringOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionParams {
    /// Number of top-scoring vertices handed to corner selection.
    pub k: usize,
    /// Clustering radius for corner suppression, normalized units.
    pub nms_radius: f64,
    /// Minimum seed corner score for a cluster to become a corner, radians.
    pub corner_threshold: f64,
    /// Minimum sigmoid-scaled path score for a wire.
    pub wire_scale_threshold: f64,
    /// Largest allowed distance from a wire's path to its straight segment.
    pub max_straightness_deviation: f64,
    /// Points closer than this in `(x, y)` are merged before triangulation.
    pub xy_epsilon: f64,
    /// Average corner scores over interior edges only.
    pub exclude_boundary_edges: bool,
    pub corner_method: CornerMethod,
    pub wire_method: WireMethod,
    /// Largest vertex distance from a region's plane, normalized units.
    pub plane_tolerance: f64,
    /// Smallest planar region kept, normalized square units.
    pub min_region_area: f64,
    /// Faces with an edge longer than this multiple of the median edge
    /// length are left out of planar regions.
    pub long_edge_factor: f64,
    /// Douglas-Peucker tolerance for region outlines; also the distance at
    /// which a corner is considered to lie on a wire.
    pub simplify_tolerance: f64,
    /// Largest mean distance from an outline side to a plane intersection
    /// line for the side to follow that line.
    pub crease_distance: f64,
    /// Shorter outline sides are folded into their neighbours.
    pub min_side_length: f64,
    /// Largest move from a simplified outline vertex to the intersection of
    /// its side lines, on top of the length of any short sides folded away
    /// at that vertex.
    pub max_corner_shift: f64,
    /// Estimates of the same corner from different regions closer than this
    /// are merged.
    pub corner_merge_radius: f64,
}

/// How corners are picked from a scored graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerMethod {
    /// Planar region outlines and their intersections.
    #[default]
    Planar,
    /// Top-K corner score sampling with greedy suppression.
    Nms,
}

/// How wires are picked among candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WireMethod {
    /// Region polygon sides produced alongside planar corners.
    #[default]
    Planar,
    /// Sigmoid-scaled path score threshold plus straightness check.
    PathScore,
}

impl CornerMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Planar => "planar",
            Self::Nms => "nms",
        }
    }
}

impl WireMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Planar => "planar",
            Self::PathScore => "path_score",
        }
    }
}

impl std::str::FromStr for CornerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Planar, Self::Nms]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown corner method `{s}`")))
    }
}

impl std::str::FromStr for WireMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Planar, Self::PathScore]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown wire method `{s}`")))
    }
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        Self {
            k: 150,
            nms_radius: 6.0,
            corner_threshold: 0.35 * PI,
            wire_scale_threshold: 0.62,
            max_straightness_deviation: 3.0,
            xy_epsilon: DEFAULT_XY_EPSILON,
            exclude_boundary_edges: false,
            corner_method: CornerMethod::default(),
            wire_method: WireMethod::default(),
            plane_tolerance: 1.0,
            min_region_area: 200.0,
            long_edge_factor: 4.0,
            simplify_tolerance: 3.0,
            crease_distance: 3.0,
            min_side_length: 16.0,
            max_corner_shift: 8.0,
            corner_merge_radius: 4.0,
        }
    }
}

impl ReconstructionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Contract(m));
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if !(self.nms_radius > 0.0 && self.nms_radius.is_finite()) {
            return bad(format!("nms_radius {} must be positive", self.nms_radius));
        }
        if !(0.0..=PI).contains(&self.corner_threshold) {
            return bad(format!("corner_threshold {} outside [0, π]", self.corner_threshold));
        }
        if !(self.wire_scale_threshold > 0.5 && self.wire_scale_threshold < 1.0) {
            return bad(format!("wire_scale_threshold {} outside (0.5, 1)", self.wire_scale_threshold));
        }
        if !(self.max_straightness_deviation > 0.0 && self.max_straightness_deviation.is_finite()) {
            return bad(format!(
                "max_straightness_deviation {} must be positive",
                self.max_straightness_deviation
            ));
        }
        if !(self.xy_epsilon >= 0.0 && self.xy_epsilon.is_finite()) {
            return bad(format!("xy_epsilon {} must be non-negative", self.xy_epsilon));
        }
        for (name, value) in [
            ("plane_tolerance", self.plane_tolerance),
            ("min_region_area", self.min_region_area),
            ("long_edge_factor", self.long_edge_factor),
            ("simplify_tolerance", self.simplify_tolerance),
            ("crease_distance", self.crease_distance),
            ("min_side_length", self.min_side_length),
            ("max_corner_shift", self.max_corner_shift),
            ("corner_merge_radius", self.corner_merge_radius),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} {value} must be positive"));
            }
        }
        Ok(())
    }

    fn scoring_options(&self) -> ScoringOptions {
        ScoringOptions { exclude_boundary_edges: self.exclude_boundary_edges }
    }
}

/// The `min(k, |V|)` highest-scoring vertices, best first, ties by index.
pub fn corner_score_sampling(sg: &ScoredGraph, k: usize) -> Result<Vec<usize>> {
    if k < 1 {
        return Err(Error::Contract("k must be at least 1".into()));
    }
    let scores = &sg.corner_scores;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let by_score = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let k = k.min(order.len());
    if k < order.len() {
        order.select_nth_unstable_by(k, by_score);
        order.truncate(k);
    }
    order.sort_by(by_score);
    Ok(order)
}

/// Predicted corners plus, for each, the nearest graph vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CornerSet {
    pub positions: Vec<Point3<f64>>,
    pub snapped: Vec<usize>,
    /// Wires the corner selector derived together with the corners; empty
    /// for score-based selection.
    pub structure_wires: Vec<(usize, usize)>,
}

impl CornerSet {
    /// Corners at `positions`, each snapped to its nearest graph vertex.
    pub fn snapped_to(sg: &ScoredGraph, positions: Vec<Point3<f64>>) -> Self {
        let snapped = positions.iter().map(|p| nearest_vertex(sg, p)).collect();
        Self { positions, snapped, structure_wires: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Nearest graph vertex to `q`, ties to the lowest index.
pub(crate) fn nearest_vertex(sg: &ScoredGraph, q: &Point3<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (v, p) in sg.graph.points.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.0 {
            best = (d, v);
        }
    }
    best.1
}

/// Greedy non-maximum suppression over `sampled` (in score order).
///
/// A vertex within `nms_radius` of one or more cluster seeds joins the
/// nearest of them (the earlier seed on ties); otherwise it seeds a new
/// cluster. Clusters whose seed scores at least `corner_threshold` become
/// corners at the score-weighted centroid of their members.
pub fn select_corners(sg: &ScoredGraph, sampled: &[usize], params: &ReconstructionParams) -> CornerSet {
    let scores = &sg.corner_scores;
    let mut seeds: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &v in sampled {
        let p = sg.position(v);
        let mut nearest: Option<(f64, usize)> = None;
        for (c, &s) in seeds.iter().enumerate() {
            let d = (sg.position(s) - p).norm();
            if d <= params.nms_radius && nearest.is_none_or(|(best, _)| d < best) {
                nearest = Some((d, c));
            }
        }
        match nearest {
            Some((_, c)) => members[c].push(v),
            None => {
                seeds.push(v);
                members.push(vec![v]);
            }
        }
    }

    let mut corners = CornerSet::default();
    for (seed, cluster) in seeds.iter().zip(&members) {
        if scores[*seed] < params.corner_threshold {
            continue;
        }
        let weight: f64 = cluster.iter().map(|&v| scores[v]).sum();
        let centroid = if weight > 0.0 {
            cluster.iter().fold(Point3::origin(), |acc, &v| acc + sg.position(v).coords * (scores[v] / weight))
        } else {
            let n = cluster.len() as f64;
            cluster.iter().fold(Point3::origin(), |acc, &v| acc + sg.position(v).coords / n)
        };
        corners.snapped.push(nearest_vertex(sg, &centroid));
        corners.positions.push(centroid);
    }
    corners
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireCandidate {
    /// Predicted corner indices, smaller first.
    pub endpoints: (usize, usize),
    /// Graph vertices the corners snap to.
    pub snapped_vertices: (usize, usize),
    pub path_score: Option<f64>,
    pub scale_factor: Option<f64>,
    /// Graph vertices along the shortest path, empty when there is none.
    pub path: Vec<usize>,
}

/// Logistic scaling of a path score in `[0, π]`.
pub fn query_scale_factor(path_score: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&path_score) {
        return Err(Error::Contract(format!("path score {path_score} outside [0, π]")));
    }
    Ok(1.0 / (1.0 + (-path_score).exp()))
}

/// One candidate per unordered pair of corners, in lexicographic order.
pub fn enumerate_wire_candidates(sg: &ScoredGraph, corners: &CornerSet) -> Vec<WireCandidate> {
    let m = corners.len();
    let mut targets: Vec<usize> = corners.snapped.clone();
    targets.sort_unstable();
    targets.dedup();
    let fields: HashMap<usize, DistanceField> = targets
        .par_iter()
        .map(|&t| (t, DistanceField::new(sg, t).expect("snapped vertices are graph vertices")))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (corners.snapped[i], corners.snapped[j]);
            let found = if a == b { None } else { fields[&b].path_from(sg, a).ok() };
            let (path_score, scale_factor, path) = match found {
                Some(ps) => {
                    let score = ps.score.clamp(0.0, PI);
                    (Some(score), query_scale_factor(score).ok(), ps.path)
                }
                None => (None, None, Vec::new()),
            };
            WireCandidate { endpoints: (i, j), snapped_vertices: (a, b), path_score, scale_factor, path }
        })
        .collect()
}

fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Largest distance from a path vertex to the segment between the corners.
pub fn straightness_deviation(sg: &ScoredGraph, candidate: &WireCandidate, corners: &CornerSet) -> f64 {
    let (a, b) = (corners.positions[candidate.endpoints.0], corners.positions[candidate.endpoints.1]);
    candidate
        .path
        .iter()
        .map(|&v| point_segment_distance(&sg.position(v), &a, &b))
        .fold(0.0, f64::max)
}

pub fn accepts_wire(sg: &ScoredGraph, candidate: &WireCandidate, corners: &CornerSet, params: &ReconstructionParams) -> bool {
    match candidate.scale_factor {
        Some(s) if s >= params.wire_scale_threshold => {
            straightness_deviation(sg, candidate, corners) <= params.max_straightness_deviation
        }
        _ => false,
    }
}

/// Accepted candidates as sorted corner index pairs.
pub fn select_wires(
    sg: &ScoredGraph,
    candidates: &[WireCandidate],
    corners: &CornerSet,
    params: &ReconstructionParams,
) -> Vec<(usize, usize)> {
    let mut wires: Vec<(usize, usize)> = candidates
        .iter()
        .filter(|c| accepts_wire(sg, c, corners, params))
        .map(|c| c.endpoints)
        .collect();
    wires.sort_unstable();
    wires.dedup();
    wires
}

/// Picks predicted corners from a scored graph.
pub trait CornerSelector: Sync {
    fn select(&self, sg: &ScoredGraph, params: &ReconstructionParams) -> Result<CornerSet>;
}

/// Picks wires among the candidates between predicted corners.
pub trait WireSelector: Sync {
    fn select(
        &self,
        sg: &ScoredGraph,
        candidates: &[WireCandidate],
        corners: &CornerSet,
        params: &ReconstructionParams,
    ) -> Vec<(usize, usize)>;
}

/// Top-K sampling followed by greedy suppression.
#[derive(Debug, Clone, Copy, Default)]
pub struct NmsCornerSelector;

impl CornerSelector for NmsCornerSelector {
    fn select(&self, sg: &ScoredGraph, params: &ReconstructionParams) -> Result<CornerSet> {
        let sampled = corner_score_sampling(sg, params.k)?;
        Ok(select_corners(sg, &sampled, params))
    }
}

/// Path-score threshold plus straightness check.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathScoreWireSelector;

impl WireSelector for PathScoreWireSelector {
    fn select(
        &self,
        sg: &ScoredGraph,
        candidates: &[WireCandidate],
        corners: &CornerSet,
        params: &ReconstructionParams,
    ) -> Vec<(usize, usize)> {
        select_wires(sg, candidates, corners, params)
    }
}

/// Planar regions grown over the graph; corners at outline intersections.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlanarCornerSelector;

impl CornerSelector for PlanarCornerSelector {
    fn select(&self, sg: &ScoredGraph, params: &ReconstructionParams) -> Result<CornerSet> {
        let structure = planar::extract_structure(sg, params);
        let mut corners = structure.corners;
        corners.structure_wires = structure.wires;
        Ok(corners)
    }
}

/// Keeps the wires the corner selector derived from region outlines.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructureWireSelector;

impl WireSelector for StructureWireSelector {
    fn select(
        &self,
        _sg: &ScoredGraph,
        _candidates: &[WireCandidate],
        corners: &CornerSet,
        _params: &ReconstructionParams,
    ) -> Vec<(usize, usize)> {
        let mut wires = corners.structure_wires.clone();
        wires.sort_unstable();
        wires.dedup();
        wires
    }
}

/// Wall-clock time spent in each pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub triangulate: Duration,
    pub score: Duration,
    pub corners: Duration,
    pub wires: Duration,
}

impl StageTimings {
    /// Triangulation plus scoring.
    pub fn scoring_total(&self) -> Duration {
        self.triangulate + self.score
    }
}

/// Everything produced by one reconstruction run.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Wireframe in the input cloud's coordinates.
    pub wireframe: Wireframe,
    /// Wireframe in the normalized frame the pipeline worked in.
    pub normalized: Wireframe,
    pub candidates: Vec<WireCandidate>,
    pub timings: StageTimings,
}

pub fn reconstruct(cloud: &PointCloud, params: &ReconstructionParams) -> Result<Wireframe> {
    Ok(reconstruct_with_params(cloud, params)?.wireframe)
}

/// Runs the pipeline with the selectors named in `params`.
pub fn reconstruct_with_params(cloud: &PointCloud, params: &ReconstructionParams) -> Result<Reconstruction> {
    let corners: &dyn CornerSelector = match params.corner_method {
        CornerMethod::Planar => &PlanarCornerSelector,
        CornerMethod::Nms => &NmsCornerSelector,
    };
    let wires: &dyn WireSelector = match params.wire_method {
        WireMethod::Planar => &StructureWireSelector,
        WireMethod::PathScore => &PathScoreWireSelector,
    };
    reconstruct_detailed(cloud, params, corners, wires)
}

/// Runs the whole pipeline with the given selectors.
pub fn reconstruct_detailed(
    cloud: &PointCloud,
    params: &ReconstructionParams,
    corner_selector: &dyn CornerSelector,
    wire_selector: &dyn WireSelector,
) -> Result<Reconstruction> {
    params.validate()?;
    let (normalized_cloud, transform) = normalize_to_range(cloud)?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let graph = triangulate(&normalized_cloud, params.xy_epsilon)?;
    timings.triangulate = t.elapsed();

    let t = Instant::now();
    let sg = score_graph_with(graph, &normalized_cloud, &params.scoring_options())?;
    timings.score = t.elapsed();

    let t = Instant::now();
    let corners = corner_selector.select(&sg, params)?;
    timings.corners = t.elapsed();

    let t = Instant::now();
    let candidates = enumerate_wire_candidates(&sg, &corners);
    let wires = wire_selector.select(&sg, &candidates, &corners, params);
    timings.wires = t.elapsed();

    let normalized = Wireframe::new(corners.positions, wires)?;
    let wireframe = transform.invert_wireframe(&normalized);
    Ok(Reconstruction { wireframe, normalized, candidates, timings })
}
