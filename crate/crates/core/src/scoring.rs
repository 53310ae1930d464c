//! Curvature signatures over a Delaunay graph.
//!
//! Faces get upward-oriented unit normals, edges get the dihedral angle
//! between their two faces (`π` on the boundary), and vertices get the mean
//! angle of their incident edges as a corner score. Wire candidates are scored
//! by the mean angle along the Euclidean shortest path between their ends.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::delaunay::DelaunayGraph;
use crate::error::{Error, Result};
use crate::io::PointCloud;

/// Minimum cross-product norm for a face to have a defined normal.
pub const MIN_CROSS_NORM: f64 = 1e-12;

/// Tolerance on the length of vectors passed to [`dihedral_angle`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoringOptions {
    /// Average corner scores over interior edges only. Vertices whose edges
    /// are all on the boundary keep the plain mean.
    pub exclude_boundary_edges: bool,
}

/// A Delaunay graph annotated with normals, edge angles and corner scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGraph {
    pub graph: DelaunayGraph,
    pub face_normals: Vec<Vector3<f64>>,
    /// Dihedral angle per edge, radians in `[0, π]`.
    pub edge_angles: Vec<f64>,
    /// Mean incident edge angle per vertex; 0 for vertices without edges.
    pub corner_scores: Vec<f64>,
}

impl ScoredGraph {
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn position(&self, v: usize) -> Point3<f64> {
        self.graph.points[v]
    }
}

/// Unit normal of triangle `(a, b, c)`, flipped to point upward when its `z`
/// component is negative.
pub fn face_normal(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Result<Vector3<f64>> {
    let n = (b - a).cross(&(c - a));
    let norm = n.norm();
    if !(norm > MIN_CROSS_NORM) {
        return Err(Error::DegenerateFace(norm));
    }
    let n = n / norm;
    Ok(if n.z < 0.0 { -n } else { n })
}

fn clamped_angle(n1: &Vector3<f64>, n2: &Vector3<f64>) -> f64 {
    n1.dot(n2).clamp(-1.0, 1.0).acos()
}

/// Angle between two unit normals, in `[0, π]`.
pub fn dihedral_angle(n1: &Vector3<f64>, n2: &Vector3<f64>) -> Result<f64> {
    for n in [n1, n2] {
        let len = n.norm();
        if !((len - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::Contract(format!("normal has length {len}, expected 1")));
        }
    }
    Ok(clamped_angle(n1, n2))
}

pub fn score_graph(graph: DelaunayGraph, cloud: &PointCloud) -> Result<ScoredGraph> {
    score_graph_with(graph, cloud, &ScoringOptions::default())
}

/// Computes face normals, then edge angles, then corner scores.
///
/// `cloud` must be the cloud `graph` was triangulated from.
pub fn score_graph_with(graph: DelaunayGraph, cloud: &PointCloud, options: &ScoringOptions) -> Result<ScoredGraph> {
    if cloud.len() != graph.source_len() {
        return Err(Error::Contract(format!(
            "graph was built from {} points, cloud has {}",
            graph.source_len(),
            cloud.len()
        )));
    }
    if let Some(v) = (0..graph.vertex_count()).find(|&v| cloud.points[graph.source_index[v]] != graph.points[v]) {
        return Err(Error::Contract(format!("graph vertex {v} does not match its cloud point")));
    }

    let face_normals = graph
        .faces
        .par_iter()
        .map(|f| {
            let [a, b, c] = f.map(|v| graph.points[v]);
            face_normal(&a, &b, &c)
        })
        .collect::<Result<Vec<_>>>()?;

    let edge_angles: Vec<f64> = graph
        .edge_faces
        .par_iter()
        .map(|ef| match ef.second {
            None => PI,
            Some(second) => clamped_angle(&face_normals[ef.first], &face_normals[second]),
        })
        .collect();

    let corner_scores: Vec<f64> = (0..graph.vertex_count())
        .into_par_iter()
        .map(|v| {
            let incident = graph.incident_edges(v);
            if incident.is_empty() {
                return 0.0;
            }
            if options.exclude_boundary_edges {
                let interior: Vec<f64> =
                    incident.iter().filter(|&&e| !graph.is_boundary(e)).map(|&e| edge_angles[e]).collect();
                if !interior.is_empty() {
                    return interior.iter().sum::<f64>() / interior.len() as f64;
                }
            }
            incident.iter().map(|&e| edge_angles[e]).sum::<f64>() / incident.len() as f64
        })
        .collect();

    Ok(ScoredGraph { graph, face_normals, edge_angles, corner_scores })
}

/// Shortest path between two graph vertices with its mean edge angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PathScore {
    /// Mean dihedral angle over the path edges.
    pub score: f64,
    /// Vertex sequence from the source to the target.
    pub path: Vec<usize>,
    /// Total 3D Euclidean length.
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then vertex index
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-target Dijkstra distances over 3D edge lengths.
#[derive(Debug, Clone)]
pub struct DistanceField {
    target: usize,
    dist: Vec<f64>,
}

fn edge_length(graph: &DelaunayGraph, u: usize, v: usize) -> f64 {
    (graph.points[u] - graph.points[v]).norm()
}

fn check_vertex(sg: &ScoredGraph, v: usize) -> Result<()> {
    if v >= sg.vertex_count() {
        return Err(Error::Contract(format!("vertex {v} out of range 0..{}", sg.vertex_count())));
    }
    Ok(())
}

impl DistanceField {
    pub fn new(sg: &ScoredGraph, target: usize) -> Result<Self> {
        check_vertex(sg, target)?;
        let graph = &sg.graph;
        let mut dist = vec![f64::INFINITY; graph.vertex_count()];
        let mut heap = BinaryHeap::new();
        dist[target] = 0.0;
        heap.push(Frontier { dist: 0.0, vertex: target });
        while let Some(Frontier { dist: d, vertex: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (w, _) in graph.neighbors(u) {
                let candidate = d + edge_length(graph, u, w);
                if candidate < dist[w] {
                    dist[w] = candidate;
                    heap.push(Frontier { dist: candidate, vertex: w });
                }
            }
        }
        Ok(Self { target, dist })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn distance(&self, v: usize) -> f64 {
        self.dist[v]
    }

    /// Lexicographically smallest shortest path from `source` to the target.
    ///
    /// At every step the walk moves to the lowest-index neighbor that lies
    /// on some shortest path, which yields the lexicographically smallest
    /// vertex sequence among all shortest paths.
    pub fn path_from(&self, sg: &ScoredGraph, source: usize) -> Result<PathScore> {
        check_vertex(sg, source)?;
        if source == self.target {
            return Err(Error::Contract(format!("path endpoints coincide at vertex {source}")));
        }
        if !self.dist[source].is_finite() {
            return Err(Error::NoPath { from: source, to: self.target });
        }
        let graph = &sg.graph;
        let mut path = vec![source];
        let mut angle_sum = 0.0;
        let mut length = 0.0;
        let mut cur = source;
        while cur != self.target {
            let here = self.dist[cur];
            let tolerance = 1e-9 * here.max(1.0);
            let mut step = None;
            let mut fallback: Option<(f64, usize, usize)> = None;
            for (w, e) in graph.neighbors(cur) {
                if !(self.dist[w] < here) {
                    continue;
                }
                let through = self.dist[w] + edge_length(graph, cur, w);
                if (through - here).abs() <= tolerance {
                    step = Some((w, e));
                    break;
                }
                if fallback.is_none_or(|(best, _, _)| through < best) {
                    fallback = Some((through, w, e));
                }
            }
            let (next, edge) = match (step, fallback) {
                (Some(s), _) => s,
                (None, Some((_, w, e))) => (w, e),
                (None, None) => return Err(Error::NoPath { from: source, to: self.target }),
            };
            length += edge_length(graph, cur, next);
            angle_sum += sg.edge_angles[edge];
            path.push(next);
            cur = next;
        }
        let edges = (path.len() - 1) as f64;
        Ok(PathScore { score: angle_sum / edges, path, length })
    }
}

/// Euclidean shortest path from `from` to `to` over graph edges, scored by
/// its mean dihedral angle. Equal-length paths resolve to the
/// lexicographically smallest vertex sequence.
pub fn shortest_path(sg: &ScoredGraph, from: usize, to: usize) -> Result<PathScore> {
    check_vertex(sg, from)?;
    check_vertex(sg, to)?;
    if from == to {
        return Err(Error::Contract(format!("path endpoints coincide at vertex {from}")));
    }
    DistanceField::new(sg, to)?.path_from(sg, from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay::triangulate;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    fn scored(coords: &[[f64; 3]]) -> ScoredGraph {
        let cloud = PointCloud::from_xyz(coords).unwrap();
        let graph = triangulate(&cloud, 0.0).unwrap();
        score_graph(graph, &cloud).unwrap()
    }

    #[test]
    fn normal_of_unit_triangle() {
        let n = face_normal(&p(0.0, 0.0, 0.0), &p(1.0, 0.0, 0.0), &p(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(n, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn downward_normal_is_flipped() {
        let n = face_normal(&p(0.0, 0.0, 0.0), &p(0.0, 1.0, 0.0), &p(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(n, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn tilted_normal() {
        let n = face_normal(&p(0.0, 0.0, 0.0), &p(1.0, 0.0, 0.0), &p(0.0, 1.0, 1.0)).unwrap();
        let expected = Vector3::new(0.0, -FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        assert!((n - expected).norm() < 1e-15);
    }

    #[test]
    fn vertical_normal_not_flipped() {
        // cross product (0, 1, 0) x ... gives z = 0; kept as computed
        let n = face_normal(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 1.0), &p(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(n.z, 0.0);
        assert_eq!(n, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn degenerate_face_rejected() {
        let err = face_normal(&p(0.0, 0.0, 0.0), &p(1.0, 1.0, 1.0), &p(2.0, 2.0, 2.0));
        assert!(matches!(err, Err(Error::DegenerateFace(_))));
    }

    #[test]
    fn dihedral_examples() {
        let up = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(dihedral_angle(&up, &up).unwrap(), 0.0);
        assert!((dihedral_angle(&up, &Vector3::new(1.0, 0.0, 0.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let tilted = Vector3::new(0.0, -FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        assert!((dihedral_angle(&up, &tilted).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(matches!(dihedral_angle(&up, &Vector3::new(0.0, 0.0, 2.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn dihedral_clamps_rounding_overshoot() {
        let a = Vector3::new(0.6, 0.8, 0.0);
        let b = a * (1.0 + 1e-12);
        assert_eq!(dihedral_angle(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let sg = scored(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(sg.edge_angles, vec![PI; 3]);
        assert_eq!(sg.corner_scores, vec![PI; 3]);
    }

    #[test]
    fn flat_grid_has_zero_interior_curvature() {
        let mut coords = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                coords.push([f64::from(i), f64::from(j), 2.0]);
            }
        }
        let sg = scored(&coords);
        for (e, &theta) in sg.edge_angles.iter().enumerate() {
            if sg.graph.is_boundary(e) {
                assert_eq!(theta, PI);
            } else {
                assert!(theta.abs() < 1e-12);
            }
        }
        for v in 0..sg.vertex_count() {
            let interior = sg.graph.incident_edges(v).iter().all(|&e| !sg.graph.is_boundary(e));
            if interior {
                assert!(sg.corner_scores[v].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_cloud_rejected() {
        let cloud = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let graph = triangulate(&cloud, 0.0).unwrap();
        let other = PointCloud::from_xyz(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 5.0]]).unwrap();
        assert!(matches!(score_graph(graph.clone(), &other), Err(Error::Contract(_))));
        let shorter = PointCloud::from_xyz(&[[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(score_graph(graph, &shorter), Err(Error::Contract(_))));
    }

    #[test]
    fn exclude_boundary_option() {
        let mut coords = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                coords.push([f64::from(i), f64::from(j), 0.0]);
            }
        }
        let cloud = PointCloud::from_xyz(&coords).unwrap();
        let graph = triangulate(&cloud, 0.0).unwrap();
        let sg = score_graph_with(graph, &cloud, &ScoringOptions { exclude_boundary_edges: true }).unwrap();
        // (0, 1) sits on the hull but its interior edges are flat
        assert!(sg.corner_scores[1].abs() < 1e-12);
    }

    #[test]
    fn adjacent_path_is_one_edge() {
        let sg = scored(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 0.0]]);
        let e = sg.graph.edge_index(0, 1).unwrap();
        let ps = shortest_path(&sg, 0, 1).unwrap();
        assert_eq!(ps.path, vec![0, 1]);
        assert_eq!(ps.score, sg.edge_angles[e]);
        assert_eq!(ps.length, 1.0);
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let sg = scored(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(matches!(shortest_path(&sg, 1, 1), Err(Error::Contract(_))));
        assert!(matches!(shortest_path(&sg, 0, 7), Err(Error::Contract(_))));
    }

    #[test]
    fn equal_length_paths_pick_smallest_sequence() {
        // raised centre vertex makes both rim routes from 1 to 2 shortest
        let sg = scored(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.5, 0.5, 5.0],
        ]);
        let ps = shortest_path(&sg, 1, 2).unwrap();
        assert_eq!(ps.path, vec![1, 0, 2]);
        assert!((ps.length - 2.0).abs() < 1e-12);
    }
}
