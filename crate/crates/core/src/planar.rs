//! Plane-structure corner and wire selection.
//!
//! Faces of the scored graph are grown into planar regions, flattest faces
//! first. Each region's outer boundary is simplified into a polygon whose
//! sides are either the intersection line with a neighbouring region's plane
//! (ridges, hips, valleys) or a line fitted to the region's outline (eaves,
//! rakes). Polygon vertices are the intersections of consecutive side lines;
//! vertices from different regions that describe the same corner are merged.
//! Polygon sides become wires, split wherever another corner lies on them,
//! and a vertical gable wall gets its base wire closed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet, VecDeque};

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector2, Vector3};

use crate::reconstruct::{CornerSet, ReconstructionParams};
use crate::scoring::ScoredGraph;

/// Planes closer than this (sine of the angle between normals) are treated
/// as parallel and do not intersect.
const PARALLEL_SINE: f64 = 0.05;

/// Consecutive polygon sides meeting at less than this angle (radians) are
/// merged into one side.
const MERGE_ANGLE: f64 = 0.2;

/// Non-vertical plane `z = a x + b y + c`, fitted by total least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        (self.normal.dot(&p.coords) - self.offset).abs()
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        (self.offset - self.normal.x * x - self.normal.y * y) / self.normal.z
    }

    /// Coefficients `(a, b, c)` of `z = a x + b y + c`.
    fn slope_form(&self) -> (f64, f64, f64) {
        let n = &self.normal;
        (-n.x / n.z, -n.y / n.z, self.offset / n.z)
    }

    /// Projection onto the `(x, y)` plane of the intersection with `other`.
    fn crease(&self, other: &Plane) -> Option<Line> {
        if self.normal.cross(&other.normal).norm() < PARALLEL_SINE {
            return None;
        }
        let (a1, b1, c1) = self.slope_form();
        let (a2, b2, c2) = other.slope_form();
        Line::from_equation(a1 - a2, b1 - b2, c1 - c2)
    }
}

/// Running sums for incremental plane fits.
#[derive(Debug, Clone, Default)]
struct Moments {
    count: usize,
    sum: Vector3<f64>,
    outer: Matrix3<f64>,
}

impl Moments {
    fn add(&mut self, p: &Point3<f64>) {
        self.count += 1;
        self.sum += p.coords;
        self.outer += p.coords * p.coords.transpose();
    }

    fn fit(&self) -> Option<Plane> {
        if self.count < 3 {
            return None;
        }
        let n = self.count as f64;
        let centroid = self.sum / n;
        let cov = self.outer / n - centroid * centroid.transpose();
        let eig = SymmetricEigen::new(cov);
        let (i, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
        let mut normal: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
        if normal.z < 0.0 {
            normal = -normal;
        }
        // vertical planes cannot carry a roof surface
        if normal.z < PARALLEL_SINE {
            return None;
        }
        Some(Plane { normal, offset: normal.dot(&centroid) })
    }
}

/// 2D line `u · p = w` with unit `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Line {
    u: Vector2<f64>,
    w: f64,
}

impl Line {
    /// Line `a x + b y + c = 0`.
    fn from_equation(a: f64, b: f64, c: f64) -> Option<Self> {
        let norm = a.hypot(b);
        if norm < 1e-12 {
            return None;
        }
        Some(Self { u: Vector2::new(a, b) / norm, w: -c / norm })
    }

    /// Total least squares fit.
    fn fit(points: &[Vector2<f64>]) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let c = points.iter().sum::<Vector2<f64>>() / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in points {
            let d = p - c;
            sxx += d.x * d.x;
            sxy += d.x * d.y;
            syy += d.y * d.y;
        }
        // direction of largest spread
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let dir = Vector2::new(theta.cos(), theta.sin());
        let u = Vector2::new(-dir.y, dir.x);
        Some(Self { u, w: u.dot(&c) })
    }

    /// Fits the points of a boundary chain, ignoring its ends, which bend
    /// away where the sampled outline cuts across a corner.
    fn fit_chain(points: &[Vector2<f64>]) -> Option<Self> {
        let (a, b) = (points[0], points[points.len() - 1]);
        let chord = b - a;
        let len2 = chord.norm_squared();
        if len2 > 0.0 {
            let inner: Vec<Vector2<f64>> = points
                .iter()
                .filter(|p| {
                    let t = (*p - a).dot(&chord) / len2;
                    (CHAIN_TRIM..=1.0 - CHAIN_TRIM).contains(&t)
                })
                .copied()
                .collect();
            if inner.len() >= 2 {
                return Self::fit(&inner);
            }
        }
        Self::fit(points)
    }

    fn distance(&self, p: &Vector2<f64>) -> f64 {
        (self.u.dot(p) - self.w).abs()
    }

    fn angle_to(&self, other: &Line) -> f64 {
        let cross = self.u.x * other.u.y - self.u.y * other.u.x;
        cross.abs().asin()
    }

    fn intersect(&self, other: &Line) -> Option<Vector2<f64>> {
        let det = self.u.x * other.u.y - self.u.y * other.u.x;
        if det.abs() < 1e-12 {
            return None;
        }
        Some(Vector2::new(
            (self.w * other.u.y - self.u.y * other.w) / det,
            (self.u.x * other.w - self.w * other.u.x) / det,
        ))
    }
}

/// A planar patch of graph faces.
#[derive(Debug, Clone)]
pub struct Region {
    pub plane: Plane,
    pub faces: Vec<usize>,
    pub area: f64,
}

fn xy(p: &Point3<f64>) -> Vector2<f64> {
    Vector2::new(p.x, p.y)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Faces with an `(x, y)` edge longer than `factor` times the median edge.
fn long_faces(sg: &ScoredGraph, factor: f64) -> Vec<bool> {
    let g = &sg.graph;
    let lengths: Vec<f64> = g.edges.iter().map(|&[a, b]| (xy(&g.points[a]) - xy(&g.points[b])).norm()).collect();
    let limit = factor * median(&mut lengths.clone());
    g.face_edges.iter().map(|fe| fe.iter().any(|&e| lengths[e] > limit)).collect()
}

fn face_area(sg: &ScoredGraph, f: usize) -> f64 {
    let [a, b, c] = sg.graph.faces[f].map(|v| sg.graph.points[v]);
    (b - a).cross(&(c - a)).norm() / 2.0
}

fn neighbor_faces(sg: &ScoredGraph, f: usize) -> impl Iterator<Item = usize> + '_ {
    sg.graph.face_edges[f].iter().filter_map(move |&e| {
        let ef = sg.graph.edge_faces[e];
        match ef.second {
            Some(s) if ef.first == f => Some(s),
            Some(_) => Some(ef.first),
            None => None,
        }
    })
}

/// Greedy region growing over face adjacency.
///
/// Seeds are taken in order of increasing summed edge angle. A face joins
/// the growing region when all three of its vertices lie within
/// `plane_tolerance` of the region's current plane, which is refitted as
/// the region grows. Regions smaller than `min_region_area` are released.
pub fn grow_regions(sg: &ScoredGraph, params: &ReconstructionParams) -> Vec<Region> {
    const NONE: usize = usize::MAX;
    let g = &sg.graph;
    let tol = params.plane_tolerance;
    let long = long_faces(sg, params.long_edge_factor);
    let flatness: Vec<f64> = g.face_edges.iter().map(|fe| fe.iter().map(|&e| sg.edge_angles[e]).sum()).collect();
    let mut order: Vec<usize> = (0..g.faces.len()).filter(|&f| !long[f]).collect();
    order.sort_by(|&a, &b| flatness[a].total_cmp(&flatness[b]).then(a.cmp(&b)));

    let mut label = vec![NONE; g.faces.len()];
    let mut tried = vec![false; g.faces.len()];
    let mut vertex_stamp = vec![NONE; g.vertex_count()];
    let mut regions = Vec::new();
    let mut stamp = 0usize;

    for &seed in &order {
        if label[seed] != NONE || tried[seed] {
            continue;
        }
        // initial plane from the seed's vertices and their neighbours
        let mut local = Moments::default();
        stamp += 1;
        for &v in &g.faces[seed] {
            for u in std::iter::once(v).chain(g.neighbors(v).map(|(w, _)| w)) {
                if vertex_stamp[u] != stamp {
                    vertex_stamp[u] = stamp;
                    local.add(&g.points[u]);
                }
            }
        }
        let Some(mut plane) = local.fit() else {
            tried[seed] = true;
            continue;
        };
        if !g.faces[seed].iter().all(|&v| plane.distance(&g.points[v]) <= tol) {
            tried[seed] = true;
            continue;
        }

        let id = regions.len();
        stamp += 1;
        let mut moments = Moments::default();
        let mut fitted_at = 0;
        let mut members = vec![seed];
        label[seed] = id;
        for &v in &g.faces[seed] {
            vertex_stamp[v] = stamp;
            moments.add(&g.points[v]);
        }
        let mut queue = VecDeque::from([seed]);
        while let Some(f) = queue.pop_front() {
            for h in neighbor_faces(sg, f).collect::<Vec<_>>() {
                if label[h] != NONE || long[h] {
                    continue;
                }
                if !g.faces[h].iter().all(|&v| plane.distance(&g.points[v]) <= tol) {
                    continue;
                }
                label[h] = id;
                members.push(h);
                queue.push_back(h);
                for &v in &g.faces[h] {
                    if vertex_stamp[v] != stamp {
                        vertex_stamp[v] = stamp;
                        moments.add(&g.points[v]);
                    }
                }
                if moments.count >= 16 && moments.count * 4 >= fitted_at * 5 {
                    if let Some(p) = moments.fit() {
                        plane = p;
                    }
                    fitted_at = moments.count;
                }
            }
        }

        let area: f64 = members.iter().map(|&f| face_area(sg, f)).sum();
        match moments.fit() {
            Some(p) if area >= params.min_region_area => {
                regions.push(Region { plane: p, faces: members, area });
            }
            _ => {
                for &f in &members {
                    label[f] = NONE;
                    tried[f] = true;
                }
            }
        }
    }
    regions
}

/// Face label for faces outside every region.
const EXTERIOR: usize = usize::MAX;

/// Fraction of a boundary chain's length left out at each end when fitting
/// its line.
const CHAIN_TRIM: f64 = 0.15;

/// Labels every face with a region index or [`EXTERIOR`].
///
/// Long faces connected to the convex hull through other long faces are
/// exterior (hull slivers, concave notches), unless the face lies on the
/// plane of a region touching one of its vertices, as the faces spanning a
/// hole in the cloud do. Every other face not grown into a region, such as
/// the strips along creases, takes the label of the nearest region by
/// lowest plane residual first.
fn fill_labels(sg: &ScoredGraph, regions: &[Region], long: &[bool], tolerance: f64) -> Vec<usize> {
    const UNSET: usize = usize::MAX - 1;
    let g = &sg.graph;
    let mut label = vec![UNSET; g.faces.len()];
    let mut vertex_regions: Vec<Vec<usize>> = vec![Vec::new(); g.points.len()];
    for (r, region) in regions.iter().enumerate() {
        for &f in &region.faces {
            label[f] = r;
            for &v in &g.faces[f] {
                if vertex_regions[v].last() != Some(&r) {
                    vertex_regions[v].push(r);
                }
            }
        }
    }
    let on_region_plane = |f: usize| {
        let tri = g.faces[f];
        tri.iter().flat_map(|&v| vertex_regions[v].iter()).any(|&r| {
            tri.iter().all(|&v| regions[r].plane.distance(&g.points[v]) <= tolerance)
        })
    };
    let exterior_candidate = |f: usize| long[f] && !on_region_plane(f);

    let mut queue: VecDeque<usize> = VecDeque::new();
    for e in g.boundary_edges() {
        let f = g.edge_faces[e].first;
        if label[f] == UNSET && exterior_candidate(f) {
            label[f] = EXTERIOR;
            queue.push_back(f);
        }
    }
    while let Some(f) = queue.pop_front() {
        for h in neighbor_faces(sg, f).collect::<Vec<_>>() {
            if label[h] == UNSET && exterior_candidate(h) {
                label[h] = EXTERIOR;
                queue.push_back(h);
            }
        }
    }

    // grow regions into the remaining faces, best plane fit first
    let residual = |f: usize, r: usize| {
        g.faces[f].iter().map(|&v| regions[r].plane.distance(&g.points[v])).fold(0.0, f64::max)
    };
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<FillStep>, label: &[usize], f: usize| {
        for h in neighbor_faces(sg, f) {
            if label[h] == UNSET {
                heap.push(FillStep { residual: residual(h, label[f]), face: h, region: label[f] });
            }
        }
    };
    for f in 0..g.faces.len() {
        if label[f] < regions.len() {
            push(&mut heap, &label, f);
        }
    }
    while let Some(step) = heap.pop() {
        if label[step.face] == UNSET {
            label[step.face] = step.region;
            push(&mut heap, &label, step.face);
        }
    }
    for l in &mut label {
        if *l == UNSET {
            *l = EXTERIOR;
        }
    }
    label
}

/// Candidate assignment of a face to a region, ordered so that a
/// [`BinaryHeap`] pops the smallest residual first.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FillStep {
    residual: f64,
    face: usize,
    region: usize,
}

impl Eq for FillStep {}

impl Ord for FillStep {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .residual
            .total_cmp(&self.residual)
            .then(other.face.cmp(&self.face))
            .then(other.region.cmp(&self.region))
    }
}

impl PartialOrd for FillStep {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn fit_faces(sg: &ScoredGraph, faces: &[usize]) -> Option<Plane> {
    let mut seen = HashSet::new();
    let mut moments = Moments::default();
    for &f in faces {
        for &v in &sg.graph.faces[f] {
            if seen.insert(v) {
                moments.add(&sg.graph.points[v]);
            }
        }
    }
    moments.fit()
}

/// Merges adjacent regions lying on the same plane. Returns the merged
/// regions and the relabelled faces.
fn merge_coplanar(
    sg: &ScoredGraph,
    regions: Vec<Region>,
    mut label: Vec<usize>,
    tolerance: f64,
) -> (Vec<Region>, Vec<usize>) {
    let g = &sg.graph;
    let n = regions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut pairs: Vec<(usize, usize)> = g
        .edge_faces
        .iter()
        .filter_map(|ef| {
            let (a, b) = (label[ef.first], label[ef.second?]);
            (a != b && a != EXTERIOR && b != EXTERIOR).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    for (a, b) in pairs {
        let (pa, pb) = (&regions[a].plane, &regions[b].plane);
        let parallel = pa.normal.cross(&pb.normal).norm() < PARALLEL_SINE;
        // compare heights at the centroid of the smaller region
        let small = if regions[a].area <= regions[b].area { &regions[a] } else { &regions[b] };
        let c = small.faces.iter().flat_map(|&f| g.faces[f]).fold(Vector3::zeros(), |acc, v| acc + g.points[v].coords)
            / (3 * small.faces.len()) as f64;
        let gap = (pa.height(c.x, c.y) - pb.height(c.x, c.y)).abs();
        if parallel && gap <= tolerance {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let mut index = vec![usize::MAX; n];
    let mut merged: Vec<Region> = Vec::new();
    for r in 0..n {
        let root = find(&mut parent, r);
        if index[root] == usize::MAX {
            index[root] = merged.len();
            merged.push(Region { plane: regions[root].plane, faces: Vec::new(), area: 0.0 });
        }
        let m = &mut merged[index[root]];
        m.faces.extend_from_slice(&regions[r].faces);
        m.area += regions[r].area;
        index[r] = index[root];
    }
    for m in merged.iter_mut().filter(|m| !m.faces.is_empty()) {
        m.faces.sort_unstable();
        if let Some(p) = fit_faces(sg, &m.faces) {
            m.plane = p;
        }
    }
    for l in &mut label {
        if *l != EXTERIOR {
            *l = index[*l];
        }
    }
    (merged, label)
}

/// One step along a region's outer boundary: the vertex the step starts
/// from and the label of the face on the far side.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BoundaryStep {
    vertex: usize,
    across: usize,
}

/// Outer boundary of region `r` as a counter-clockwise loop of steps.
fn outer_loop(sg: &ScoredGraph, label: &[usize], r: usize) -> Vec<BoundaryStep> {
    let g = &sg.graph;
    let mut next: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (f, tri) in g.faces.iter().enumerate() {
        if label[f] != r {
            continue;
        }
        for i in 0..3 {
            let ef = g.edge_faces[g.face_edges[f][i]];
            let across = if ef.first == f { ef.second } else { Some(ef.first) };
            let across = across.map_or(EXTERIOR, |h| label[h]);
            if across != r {
                next.entry(tri[(i + 1) % 3]).or_default().push((tri[(i + 2) % 3], across));
            }
        }
    }
    for targets in next.values_mut() {
        targets.sort_unstable();
        targets.reverse();
    }

    let mut best: (f64, Vec<BoundaryStep>) = (0.0, Vec::new());
    while let Some((&start, _)) = next.iter().find(|(_, t)| !t.is_empty()) {
        let mut cycle = Vec::new();
        let mut cur = start;
        while let Some((n, across)) = next.get_mut(&cur).and_then(|t| t.pop()) {
            cycle.push(BoundaryStep { vertex: cur, across });
            cur = n;
            if n == start {
                break;
            }
        }
        let area: f64 = (0..cycle.len())
            .map(|i| {
                let (p, q) = (g.points[cycle[i].vertex], g.points[cycle[(i + 1) % cycle.len()].vertex]);
                p.x * q.y - q.x * p.y
            })
            .sum::<f64>()
            / 2.0;
        if area > best.0 {
            best = (area, cycle);
        }
    }
    best.1
}

fn point_line_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        return (p - a).norm();
    }
    (ab.x * (p.y - a.y) - ab.y * (p.x - a.x)).abs() / len
}

/// Douglas-Peucker over `pts[lo..=hi]`, pushing kept interior indices.
fn douglas_peucker(pts: &[Vector2<f64>], lo: usize, hi: usize, tol: f64, keep: &mut Vec<usize>) {
    if hi <= lo + 1 {
        return;
    }
    let (mut worst, mut at) = (0.0, lo);
    for i in lo + 1..hi {
        let d = point_line_distance(&pts[i], &pts[lo], &pts[hi]);
        if d > worst {
            worst = d;
            at = i;
        }
    }
    if worst > tol {
        douglas_peucker(pts, lo, at, tol, keep);
        keep.push(at);
        douglas_peucker(pts, at, hi, tol, keep);
    }
}

/// Splits an open polyline into pieces that each stay within `tol` of
/// their chord.
fn split_polyline(pts: &[Vector2<f64>], tol: f64) -> Vec<Vec<Vector2<f64>>> {
    let mut keep = vec![0];
    douglas_peucker(pts, 0, pts.len() - 1, tol, &mut keep);
    keep.push(pts.len() - 1);
    keep.windows(2).map(|w| pts[w[0]..=w[1]].to_vec()).collect()
}

/// Splits a closed loop into pieces, starting from its lowest point and
/// the point farthest from it.
fn split_loop(pts: &[Vector2<f64>], tol: f64) -> Vec<Vec<Vector2<f64>>> {
    let n = pts.len();
    let start = (0..n).min_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x).then(pts[a].y.total_cmp(&pts[b].y))).unwrap_or(0);
    let rotated: Vec<Vector2<f64>> = (0..=n).map(|i| pts[(start + i) % n]).collect();
    let far = (1..n)
        .max_by(|&a, &b| (rotated[a] - rotated[0]).norm().total_cmp(&(rotated[b] - rotated[0]).norm()).then(b.cmp(&a)))
        .unwrap_or(1);
    let mut pieces = split_polyline(&rotated[..=far], tol);
    pieces.extend(split_polyline(&rotated[far..], tol));
    pieces
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SideKind {
    /// Shares a crease with the region of this index.
    Crease(usize),
    Outline,
}

#[derive(Debug, Clone)]
struct Side {
    kind: SideKind,
    line: Line,
    points: Vec<Vector2<f64>>,
    /// Length of short sides folded away at this side's start; the corner
    /// there may move this much further from the sampled junction.
    slack: f64,
}

fn outline_side(points: Vec<Vector2<f64>>) -> Option<Side> {
    Line::fit_chain(&points).map(|line| Side { kind: SideKind::Outline, line, points, slack: 0.0 })
}

/// Sides of region `r`'s polygon, before consolidation.
fn region_sides(
    sg: &ScoredGraph,
    steps: &[BoundaryStep],
    r: usize,
    regions: &[Region],
    params: &ReconstructionParams,
) -> Vec<Side> {
    let g = &sg.graph;
    let n = steps.len();
    let at = |i: usize| xy(&g.points[steps[i % n].vertex]);
    let Some(first_change) = (0..n).find(|&i| steps[i].across != steps[(i + n - 1) % n].across) else {
        // a single run all the way around
        let pts: Vec<Vector2<f64>> = (0..n).map(at).collect();
        return if steps[0].across == EXTERIOR {
            split_loop(&pts, params.simplify_tolerance).into_iter().filter_map(outline_side).collect()
        } else {
            Vec::new()
        };
    };

    let mut sides = Vec::new();
    let mut i = first_change;
    while i < first_change + n {
        let across = steps[i % n].across;
        let mut j = i;
        while j < first_change + n && steps[j % n].across == across {
            j += 1;
        }
        let chain: Vec<Vector2<f64>> = (i..=j).map(at).collect();
        let crease = (across != EXTERIOR)
            .then(|| regions[r].plane.crease(&regions[across].plane))
            .flatten()
            .filter(|line| chain.iter().map(|p| line.distance(p)).sum::<f64>() / chain.len() as f64 <= params.crease_distance);
        match crease {
            Some(line) => sides.push(Side { kind: SideKind::Crease(across), line, points: chain, slack: 0.0 }),
            None => sides.extend(split_polyline(&chain, params.simplify_tolerance).into_iter().filter_map(outline_side)),
        }
        i = j;
    }
    sides
}

fn side_length(side: &Side) -> f64 {
    (side.points[side.points.len() - 1] - side.points[0]).norm()
}

/// Merges sides that continue each other and folds short sides into their
/// longer neighbour.
fn consolidate(mut sides: Vec<Side>, params: &ReconstructionParams) -> Vec<Side> {
    let joinable = |a: &Side, b: &Side| match (a.kind, b.kind) {
        (SideKind::Crease(x), SideKind::Crease(y)) => x == y,
        (SideKind::Outline, SideKind::Outline) => a.line.angle_to(&b.line) < MERGE_ANGLE,
        _ => false,
    };
    // `refit` merges two pieces of one side; otherwise `b` or `a` is a
    // short side being folded away and `keep` retains its line
    let join = |a: &Side, b: &Side, keep: &Side, slack: f64, refit: bool| {
        let mut points = a.points.clone();
        points.extend_from_slice(&b.points[1..]);
        let line = match keep.kind {
            SideKind::Outline if refit => Line::fit_chain(&points).unwrap_or(keep.line),
            _ => keep.line,
        };
        Side { kind: keep.kind, line, points, slack }
    };
    loop {
        let n = sides.len();
        if n <= 2 {
            return sides;
        }
        if let Some(i) = (0..n).find(|&i| joinable(&sides[i], &sides[(i + 1) % n])) {
            let j = (i + 1) % n;
            sides[i] = join(&sides[i], &sides[j], &sides[i], sides[i].slack, true);
            sides.remove(j);
            continue;
        }
        let shortest = (0..n).min_by(|&a, &b| side_length(&sides[a]).total_cmp(&side_length(&sides[b])).then(a.cmp(&b)));
        match shortest {
            Some(i) if side_length(&sides[i]) < params.min_side_length => {
                let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
                let slack = sides[i].slack + side_length(&sides[i]);
                if side_length(&sides[prev]) >= side_length(&sides[next]) {
                    sides[prev] = join(&sides[prev], &sides[i], &sides[prev], sides[prev].slack, false);
                    sides[next].slack = slack;
                } else {
                    sides[next] = join(&sides[i], &sides[next], &sides[next], slack, false);
                }
                sides.remove(i);
            }
            _ => return sides,
        }
    }
}

/// Corners, wires and regions produced by the plane-structure selector.
#[derive(Debug, Clone, Default)]
pub struct PlanarStructure {
    pub corners: CornerSet,
    pub wires: Vec<(usize, usize)>,
    pub regions: Vec<Region>,
}

pub fn extract_structure(sg: &ScoredGraph, params: &ReconstructionParams) -> PlanarStructure {
    let regions = grow_regions(sg, params);
    let long = long_faces(sg, params.long_edge_factor);
    let label = fill_labels(sg, &regions, &long, 2.0 * params.plane_tolerance);
    let (regions, label) = merge_coplanar(sg, regions, label, params.plane_tolerance);

    // polygon vertices per region, as (estimate index, kind of the side
    // leaving the vertex)
    let mut estimates: Vec<Point3<f64>> = Vec::new();
    let mut polygons: Vec<Vec<(usize, SideKind)>> = Vec::new();
    for (r, region) in regions.iter().enumerate() {
        let steps = outer_loop(sg, &label, r);
        if steps.len() < 3 {
            continue;
        }
        let sides = consolidate(region_sides(sg, &steps, r, &regions, params), params);
        if sides.len() < 3 {
            continue;
        }
        let mut polygon = Vec::new();
        for i in 0..sides.len() {
            let (s, t) = (&sides[i], &sides[(i + 1) % sides.len()]);
            let junction = t.points[0];
            let at = match s.line.intersect(&t.line) {
                Some(p) if (p - junction).norm() <= params.max_corner_shift + t.slack => p,
                _ => junction,
            };
            polygon.push((estimates.len(), t.kind));
            estimates.push(Point3::new(at.x, at.y, region.plane.height(at.x, at.y)));
        }
        polygons.push(polygon);
    }

    // merge estimates of the same corner
    let mut cluster_of = vec![0usize; estimates.len()];
    let mut seeds: Vec<Point3<f64>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, e) in estimates.iter().enumerate() {
        let nearest = seeds
            .iter()
            .enumerate()
            .map(|(c, s)| ((s - e).norm(), c))
            .filter(|&(d, _)| d <= params.corner_merge_radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((_, c)) => {
                members[c].push(i);
                cluster_of[i] = c;
            }
            None => {
                cluster_of[i] = seeds.len();
                seeds.push(*e);
                members.push(vec![i]);
            }
        }
    }
    let positions: Vec<Point3<f64>> = members
        .iter()
        .map(|m| {
            let n = m.len() as f64;
            m.iter().fold(Point3::origin(), |acc, &i| acc + estimates[i].coords / n)
        })
        .collect();

    // polygon sides become wires; remember which follow the outline
    let mut wires: Vec<(usize, usize)> = Vec::new();
    let mut outline: Vec<(usize, usize)> = Vec::new();
    for poly in &polygons {
        let n = poly.len();
        for i in 0..n {
            let a = cluster_of[poly[i].0];
            let b = cluster_of[poly[(i + 1) % n].0];
            if a == b {
                continue;
            }
            let w = (a.min(b), a.max(b));
            wires.push(w);
            if poly[i].1 == SideKind::Outline {
                outline.push(w);
            }
        }
    }
    let tol = params.simplify_tolerance;
    let mut wires = split_at_corners(&wires, &positions, tol);
    let outline: HashSet<(usize, usize)> = split_at_corners(&outline, &positions, tol).into_iter().collect();
    wires.extend(gable_bases(&wires, &outline, &positions, tol));
    wires.sort_unstable();
    wires.dedup();

    PlanarStructure { corners: CornerSet::snapped_to(sg, positions), wires, regions }
}

/// Splits every wire at corners lying on it (within `tol`), sorted along it.
fn split_at_corners(wires: &[(usize, usize)], positions: &[Point3<f64>], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &(a, b) in wires {
        let (pa, pb) = (positions[a], positions[b]);
        let ab = pb - pa;
        let len = ab.norm();
        let mut on: Vec<(f64, usize)> = vec![(0.0, a), (1.0, b)];
        if len > 0.0 {
            let margin = tol / len;
            for (c, pc) in positions.iter().enumerate() {
                if c == a || c == b {
                    continue;
                }
                let t = (pc - pa).dot(&ab) / (len * len);
                if t > margin && t < 1.0 - margin && (pc - (pa + ab * t)).norm() <= tol {
                    on.push((t, c));
                }
            }
        }
        on.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for pair in on.windows(2) {
            let (u, v) = (pair[0].1, pair[1].1);
            out.push((u.min(v), u.max(v)));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Base wires under vertical gable walls: two outline wires `a - c - b`
/// whose plan views are collinear, with `c` standing above both ends.
fn gable_bases(
    wires: &[(usize, usize)],
    outline: &HashSet<(usize, usize)>,
    positions: &[Point3<f64>],
    tol: f64,
) -> Vec<(usize, usize)> {
    let mut by_corner: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in wires.iter().filter(|w| outline.contains(w)) {
        by_corner.entry(a).or_default().push(b);
        by_corner.entry(b).or_default().push(a);
    }
    let mut out = Vec::new();
    for (&c, ends) in &by_corner {
        for (i, &a) in ends.iter().enumerate() {
            for &b in &ends[i + 1..] {
                let (pa, pb, pc) = (positions[a], positions[b], positions[c]);
                let collinear = point_line_distance(&xy(&pc), &xy(&pa), &xy(&pb)) <= tol;
                let between = (xy(&pc) - xy(&pa)).dot(&(xy(&pc) - xy(&pb))) < 0.0;
                let above = pc.z > pa.z.max(pb.z) + tol;
                if collinear && between && above {
                    out.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    out
}
